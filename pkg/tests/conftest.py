import pytest

# Human-readable labels for the acceptance suite, printed one per criterion
# at the end of the run.
ACCEPTANCE_CRITERIA = {
    "test_label_format_golden": "label-format golden line + 1000-box round-trip (<1s)",
    "test_augmentation_suite": "augmentation involutions, unsharp identity, noise stats (<30s)",
    "test_split_suite": "stratified split exactness, leakage freedom, determinism (<5s)",
    "test_metrics_oracle": "macro PRF1 + AUC vs independent oracles, 1000 cases each (<30s)",
    "test_table_reproduction": "comparison tables: per-column maxima on the YOLOv8 row (<1s)",
    "test_cascade_dispatch": "cascade: 110 fixtures, 100% tag agreement + dispatch check (<10s)",
    "test_service_contract": "service endpoint x role x error matrix (<60s)",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    reports = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" in report.nodeid and report.when == "call":
                reports.append((report, outcome))
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    seen = set()
    for report, outcome in sorted(reports, key=lambda item: item[0].nodeid):
        name = report.nodeid.split("::")[-1]
        base = name.split("[")[0]
        if base in seen:
            continue
        seen.add(base)
        label = ACCEPTANCE_CRITERIA.get(base, base)
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {label}")


@pytest.fixture()
def stub_cascade():
    """Fresh registry + full stub cascade config."""
    from surgscan.inference import BackendRegistry, register_stub_cascade

    registry = BackendRegistry()
    config = register_stub_cascade(registry)
    return registry, config
