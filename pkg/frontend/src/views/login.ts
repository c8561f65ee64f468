import { ApiError, SurgScanApi } from '../api';
import type { Session } from '../state';

export function loginView(api: SurgScanApi, onLogin: (session: Session) => void): HTMLElement {
  const root = document.createElement('div');
  root.className = 'login-view';
  root.innerHTML = `
    <h1>SurgScan</h1>
    <form class="login-form">
      <label>Email
        <input type="email" name="email" required autocomplete="username" />
      </label>
      <label>Password
        <input type="password" name="password" required autocomplete="current-password" />
      </label>
      <button type="submit">Sign in</button>
      <p class="login-error" role="alert" hidden></p>
    </form>
  `;

  const form = root.querySelector('form')!;
  const error = root.querySelector<HTMLParagraphElement>('.login-error')!;

  form.addEventListener('submit', async (event) => {
    event.preventDefault();
    const email = (form.elements.namedItem('email') as HTMLInputElement).value.trim();
    const password = (form.elements.namedItem('password') as HTMLInputElement).value;
    if (!email || !password) {
      // required attributes normally stop this before any request goes out
      return;
    }
    error.hidden = true;
    try {
      const res = await api.login(email, password);
      onLogin({ token: res.token, role: res.role, user: res.user, openBatch: res.open_batch });
    } catch (err) {
      error.hidden = false;
      if (err instanceof ApiError && err.code === 'InactiveAccount') {
        error.textContent = 'This account has been deactivated.';
      } else if (err instanceof ApiError && err.status === 401) {
        error.textContent = 'Invalid email or password.';
      } else {
        error.textContent = err instanceof Error ? err.message : 'Login failed.';
      }
    }
  });

  return root;
}
