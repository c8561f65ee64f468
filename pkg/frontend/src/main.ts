import { SurgScanApi } from './api';
import { clearSession, loadSession, saveSession } from './state';
import type { Session } from './state';
import { adminView } from './views/admin';
import { loginView } from './views/login';
import { userView } from './views/user';
import './style.css';

export function mountApp(root: HTMLElement, api: SurgScanApi = new SurgScanApi()): void {
  function render(): void {
    const session = loadSession();
    if (!session) {
      api.token = null;
      root.replaceChildren(loginView(api, onLogin));
      return;
    }
    api.token = session.token;
    const logout = (): void => {
      clearSession();
      render();
    };
    // Role drives which dashboard is reachable; a non-admin can never mount
    // the admin view no matter how they navigated here.
    root.replaceChildren(
      session.role === 'Admin' ? adminView(api, session, logout) : userView(api, session, logout),
    );
  }

  function onLogin(session: Session): void {
    saveSession(session);
    render();
  }

  render();
}

const appRoot = document.getElementById('app');
if (appRoot) {
  mountApp(appRoot);
}
