import { SurgScanApi } from '../api';
import type { AdminUser } from '../api';
import { groupedBarChart } from '../chart';
import type { Session } from '../state';

// The user table keeps the classic admin columns; the destructive action is
// deactivation, never row deletion, so history stays auditable.
const COLUMNS = ['User ID', 'User Name', 'No. of Batches', 'Deactivate', 'Edit'];

function userRow(
  user: AdminUser,
  api: SurgScanApi,
  onChanged: () => void,
): HTMLTableRowElement {
  const tr = document.createElement('tr');
  tr.dataset.userId = String(user.id);
  tr.dataset.status = user.status;

  const id = document.createElement('td');
  id.textContent = String(user.id);
  const name = document.createElement('td');
  name.className = 'cell-name';
  name.textContent = user.name;
  if (user.status === 'Inactive') {
    const badge = document.createElement('span');
    badge.className = 'badge-inactive';
    badge.textContent = 'Inactive';
    name.appendChild(badge);
  }
  const batches = document.createElement('td');
  batches.textContent = String(user.batch_count);

  const toggleCell = document.createElement('td');
  const toggle = document.createElement('button');
  toggle.className = 'toggle-active';
  toggle.textContent = user.status === 'Active' ? 'Deactivate' : 'Activate';
  toggle.addEventListener('click', async () => {
    const next = user.status === 'Active' ? 'Inactive' : 'Active';
    await api.updateUser(user.id, { status: next });
    onChanged();
  });
  toggleCell.appendChild(toggle);

  const editCell = document.createElement('td');
  const edit = document.createElement('button');
  edit.className = 'edit';
  edit.textContent = 'Edit';
  edit.addEventListener('click', () => {
    const input = document.createElement('input');
    input.value = user.name;
    const save = document.createElement('button');
    save.className = 'save';
    save.textContent = 'Save';
    save.addEventListener('click', async () => {
      const newName = input.value.trim();
      if (newName && newName !== user.name) {
        await api.updateUser(user.id, { name: newName });
      }
      onChanged();
    });
    name.replaceChildren(input);
    editCell.replaceChildren(save);
  });
  editCell.appendChild(edit);

  tr.append(id, name, batches, toggleCell, editCell);
  return tr;
}

export function adminView(
  api: SurgScanApi,
  session: Session,
  onLogout: () => void,
): HTMLElement {
  const root = document.createElement('div');
  root.className = 'admin-view';
  root.innerHTML = `
    <header>
      <h1>SurgScan admin</h1>
      <span class="who">${session.user.name}</span>
      <button class="logout">Log out</button>
    </header>
    <main>
      <section class="users-section">
        <h2>Users</h2>
        <table class="users-table">
          <thead><tr>${COLUMNS.map((c) => `<th>${c}</th>`).join('')}</tr></thead>
          <tbody></tbody>
        </table>
      </section>
      <section class="overview-section">
        <h2>Batches</h2>
        <div class="overview-chart"></div>
        <ul class="overview-list"></ul>
      </section>
    </main>
  `;

  const tbody = root.querySelector<HTMLTableSectionElement>('tbody')!;
  const chartSlot = root.querySelector<HTMLElement>('.overview-chart')!;
  const list = root.querySelector<HTMLUListElement>('.overview-list')!;

  async function refreshUsers(): Promise<void> {
    const { users } = await api.adminUsers();
    tbody.replaceChildren(...users.map((u) => userRow(u, api, () => void refreshUsers())));
  }

  async function refreshOverview(): Promise<void> {
    const { batches } = await api.adminOverview();
    chartSlot.replaceChildren(
      groupedBarChart(
        batches.map((b) => ({
          label: b.batch_number,
          defected: b.stats.defected,
          nonDefected: b.stats.non_defected,
        })),
      ),
    );
    list.replaceChildren(
      ...batches.map((b) => {
        const li = document.createElement('li');
        li.textContent =
          `${b.batch_number} (${b.state}) — ${b.owner.name}: ` +
          `${b.stats.total_inspected} inspected, ${b.stats.defected} defected`;
        return li;
      }),
    );
  }

  root.querySelector('.logout')!.addEventListener('click', onLogout);
  void refreshUsers();
  void refreshOverview();
  return root;
}
