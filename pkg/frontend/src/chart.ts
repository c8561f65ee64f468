// Grouped bar chart rendered as plain styled divs: one group per batch,
// one bar for defected and one for non-defected counts.

export interface ChartGroup {
  label: string;
  defected: number;
  nonDefected: number;
}

export function groupedBarChart(groups: ChartGroup[]): HTMLElement {
  const root = document.createElement('div');
  root.className = 'chart';
  const max = Math.max(1, ...groups.flatMap((g) => [g.defected, g.nonDefected]));

  for (const group of groups) {
    const el = document.createElement('div');
    el.className = 'chart-group';

    const bars = document.createElement('div');
    bars.className = 'chart-bars';
    for (const [kind, value] of [
      ['defected', group.defected],
      ['non-defected', group.nonDefected],
    ] as const) {
      const bar = document.createElement('div');
      bar.className = `chart-bar chart-bar-${kind}`;
      bar.style.height = `${Math.round((value / max) * 100)}%`;
      bar.title = `${kind}: ${value}`;
      const count = document.createElement('span');
      count.className = 'chart-count';
      count.textContent = String(value);
      bar.appendChild(count);
      bars.appendChild(bar);
    }
    el.appendChild(bars);

    const label = document.createElement('div');
    label.className = 'chart-label';
    label.textContent = group.label;
    el.appendChild(label);

    root.appendChild(el);
  }

  const legend = document.createElement('div');
  legend.className = 'chart-legend';
  legend.innerHTML =
    '<span class="chart-bar-defected swatch"></span>Defected ' +
    '<span class="chart-bar-non-defected swatch"></span>Non-defected';
  root.appendChild(legend);
  return root;
}
