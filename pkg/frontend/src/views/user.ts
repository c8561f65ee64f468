import { ApiError, SurgScanApi } from '../api';
import type { BatchStats, UploadResponse } from '../api';
import type { Session } from '../state';

function statsCard(stats: BatchStats | null): HTMLElement {
  const card = document.createElement('section');
  card.className = 'stats-card';
  if (!stats) {
    card.innerHTML = '<p class="muted">No inspections yet.</p>';
    return card;
  }
  const perClass = Object.entries(stats.per_defect_class)
    .map(([name, count]) => `<li>${name}: <b data-stat="class-${name}">${count}</b></li>`)
    .join('');
  card.innerHTML = `
    <h3>Batch statistics</h3>
    <dl>
      <dt>Total inspected</dt><dd data-stat="total">${stats.total_inspected}</dd>
      <dt>Defected</dt><dd data-stat="defected">${stats.defected}</dd>
      <dt>Non-defected</dt><dd data-stat="non-defected">${stats.non_defected}</dd>
    </dl>
    <ul class="per-class">${perClass}</ul>
  `;
  return card;
}

function verdictRow(upload: UploadResponse): HTMLElement {
  const row = document.createElement('li');
  row.className = 'verdict-row';
  const name = document.createElement('span');
  name.className = 'verdict-file';
  name.textContent = upload.original_filename;
  row.appendChild(name);

  if (upload.result) {
    const r = upload.result;
    const overall = document.createElement('span');
    overall.className = `verdict ${r.overall === 'Defective' ? 'bad' : 'good'}`;
    overall.textContent = r.overall;
    const instrument = document.createElement('span');
    instrument.className = 'verdict-instrument';
    instrument.textContent = r.instrument;
    row.append(instrument, overall);
    for (const [defect, confidence] of r.defects) {
      if (defect === 'NonDefective') continue;
      const chip = document.createElement('span');
      chip.className = 'defect-chip';
      chip.textContent = `${defect} ${(confidence * 100).toFixed(0)}%`;
      row.appendChild(chip);
    }
  } else if (upload.failure) {
    const failure = document.createElement('span');
    failure.className = 'verdict warn';
    failure.textContent =
      upload.failure.error === 'LowConfidenceInstrument'
        ? `Unrecognized instrument (best guess ${upload.failure.instrument_guess})`
        : upload.failure.error;
    row.appendChild(failure);
  }
  return row;
}

function errorRow(fileName: string, err: unknown): HTMLElement {
  const row = document.createElement('li');
  row.className = 'verdict-row';
  const name = document.createElement('span');
  name.className = 'verdict-file';
  name.textContent = fileName;
  const failure = document.createElement('span');
  failure.className = 'verdict bad';
  failure.textContent =
    err instanceof ApiError ? `${err.code}: ${err.message}` : 'Upload failed';
  row.append(name, failure);
  return row;
}

export function userView(
  api: SurgScanApi,
  session: Session,
  onLogout: () => void,
): HTMLElement {
  const root = document.createElement('div');
  root.className = 'user-view';
  root.innerHTML = `
    <header>
      <h1>SurgScan</h1>
      <span class="who">${session.user.name}</span>
      <button class="logout">Log out</button>
    </header>
    <main>
      <section class="batch-controls">
        <button class="create-batch">Create batch</button>
        <p class="batch-note" hidden></p>
      </section>
      <section class="batch-area" hidden>
        <h2 class="batch-title"></h2>
        <div class="dropzone" tabindex="0">
          <p>Drag images here or</p>
          <input type="file" accept="image/png,image/jpeg" multiple />
        </div>
        <ul class="verdict-list"></ul>
        <div class="stats-slot"></div>
        <button class="close-batch">Close batch</button>
      </section>
    </main>
  `;

  const createBtn = root.querySelector<HTMLButtonElement>('.create-batch')!;
  const note = root.querySelector<HTMLParagraphElement>('.batch-note')!;
  const area = root.querySelector<HTMLElement>('.batch-area')!;
  const title = root.querySelector<HTMLHeadingElement>('.batch-title')!;
  const dropzone = root.querySelector<HTMLElement>('.dropzone')!;
  const fileInput = root.querySelector<HTMLInputElement>('input[type=file]')!;
  const verdicts = root.querySelector<HTMLUListElement>('.verdict-list')!;
  const statsSlot = root.querySelector<HTMLElement>('.stats-slot')!;
  const closeBtn = root.querySelector<HTMLButtonElement>('.close-batch')!;

  let batchNumber = session.openBatch;

  async function refreshStats(): Promise<void> {
    if (!batchNumber) return;
    const stats = await api.batchStats(batchNumber);
    statsSlot.replaceChildren(statsCard(stats));
  }

  function showBatch(): void {
    if (!batchNumber) return;
    createBtn.disabled = true;
    note.hidden = false;
    note.textContent = `Batch ${batchNumber} is open; close it before starting another.`;
    area.hidden = false;
    title.textContent = `Batch ${batchNumber}`;
    statsSlot.replaceChildren(statsCard(null));
    void refreshStats().catch(() => statsSlot.replaceChildren(statsCard(null)));
  }

  function hideBatch(): void {
    batchNumber = null;
    createBtn.disabled = false;
    note.hidden = true;
    area.hidden = true;
    verdicts.replaceChildren();
  }

  createBtn.addEventListener('click', async () => {
    try {
      const batch = await api.createBatch();
      batchNumber = batch.batch_number;
      showBatch();
    } catch (err) {
      if (err instanceof ApiError && err.code === 'AlreadyAssigned') {
        createBtn.disabled = true;
        note.hidden = false;
        note.textContent = 'You already have an open batch; close it before starting another.';
      } else {
        note.hidden = false;
        note.textContent = err instanceof Error ? err.message : 'Could not create a batch.';
      }
    }
  });

  async function uploadOne(file: File): Promise<void> {
    if (!batchNumber) return;
    try {
      const res = await api.uploadImage(batchNumber, file);
      verdicts.appendChild(verdictRow(res));
    } catch (err) {
      // a bad file must not abort the other uploads in flight
      verdicts.appendChild(errorRow(file.name, err));
    }
  }

  async function uploadAll(files: Iterable<File>): Promise<void> {
    await Promise.all(Array.from(files).map(uploadOne));
    await refreshStats().catch(() => undefined);
  }

  fileInput.addEventListener('change', () => {
    if (fileInput.files) void uploadAll(fileInput.files);
    fileInput.value = '';
  });
  dropzone.addEventListener('dragover', (event) => {
    event.preventDefault();
    dropzone.classList.add('dragging');
  });
  dropzone.addEventListener('dragleave', () => dropzone.classList.remove('dragging'));
  dropzone.addEventListener('drop', (event) => {
    event.preventDefault();
    dropzone.classList.remove('dragging');
    const files = event.dataTransfer?.files;
    if (files && files.length) void uploadAll(files);
  });

  closeBtn.addEventListener('click', async () => {
    if (!batchNumber) return;
    try {
      await api.closeBatch(batchNumber);
      hideBatch();
    } catch (err) {
      note.hidden = false;
      note.textContent = err instanceof Error ? err.message : 'Could not close the batch.';
    }
  });

  root.querySelector('.logout')!.addEventListener('click', onLogout);

  if (batchNumber) showBatch();
  return root;
}
