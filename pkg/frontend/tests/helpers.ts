// In-memory stand-in for the inspection service, driven through a fetch
// stub. Component tests assert the UI mirrors these responses exactly.

import type { AdminUser, BatchStats, InspectionResult } from '../src/api';

interface FakeBatch {
  batch_number: string;
  state: 'Open' | 'Closed';
  created_at: string;
  owner_id: number;
  images: { original_filename: string; result: InspectionResult | null; failure: string | null }[];
  stats: BatchStats;
}

interface FakeUser extends AdminUser {
  password: string;
}

let nextStatus = 0;

export class FakeService {
  users: FakeUser[] = [
    {
      id: 1,
      name: 'Root',
      email: 'root@example.com',
      role: 'Admin',
      status: 'Active',
      batch_count: 0,
      password: 'root-pw',
    },
    {
      id: 2,
      name: 'Alice',
      email: 'alice@example.com',
      role: 'User',
      status: 'Active',
      batch_count: 0,
      password: 'alice-pw',
    },
  ];

  batches: FakeBatch[] = [];
  tokens = new Map<string, number>();
  requests: { method: string; path: string }[] = [];
  /** Overrides stats returned for any batch when set; lets tests feed
   * numbers that could not be recomputed client-side. */
  statsOverride: BatchStats | null = null;

  get fetch(): typeof fetch {
    return (input, init) => this.handle(input, init);
  }

  private async handle(input: RequestInfo | URL, init?: RequestInit): Promise<Response> {
    const url = typeof input === 'string' ? input : input instanceof URL ? input.href : input.url;
    const path = url.replace(/^https?:\/\/[^/]+/, '');
    const method = (init?.method ?? 'GET').toUpperCase();
    this.requests.push({ method, path });

    const auth = new Headers(init?.headers).get('Authorization') ?? '';
    const token = auth.startsWith('Bearer ') ? auth.slice(7) : null;
    const userId = token ? this.tokens.get(token) : undefined;
    const user = this.users.find((u) => u.id === userId);

    const reply = (status: number, body: unknown): Response =>
      new Response(JSON.stringify(body), {
        status,
        headers: { 'Content-Type': 'application/json' },
      });
    const fail = (status: number, code: string, message = code): Response =>
      reply(status, { error: code, message });

    if (method === 'GET' && path === '/api/health') {
      return reply(200, { status: 'ok', version: 'fake' });
    }

    if (method === 'POST' && path === '/api/login') {
      const { email, password } = JSON.parse(String(init?.body ?? '{}'));
      const found = this.users.find((u) => u.email === email && u.password === password);
      if (!found) return fail(401, 'InvalidCredentials');
      if (found.status === 'Inactive') return fail(403, 'InactiveAccount');
      const newToken = `tok-${found.id}-${nextStatus++}`;
      this.tokens.set(newToken, found.id);
      const open = this.batches.find((b) => b.owner_id === found.id && b.state === 'Open');
      const { password: _pw, batch_count: _bc, ...info } = found;
      return reply(200, {
        token: newToken,
        role: found.role,
        user: info,
        open_batch: open?.batch_number ?? null,
      });
    }

    if (!user) return fail(401, 'Unauthorized');
    if (user.status === 'Inactive') return fail(403, 'InactiveAccount');

    if (method === 'POST' && path === '/api/batches') {
      if (this.batches.some((b) => b.owner_id === user.id && b.state === 'Open')) {
        return fail(409, 'AlreadyAssigned');
      }
      const batch: FakeBatch = {
        batch_number: `B-${String(this.batches.length + 1).padStart(6, '0')}`,
        state: 'Open',
        created_at: '2026-01-01T00:00:00Z',
        owner_id: user.id,
        images: [],
        stats: { total_inspected: 0, defected: 0, non_defected: 0, per_defect_class: {} },
      };
      this.batches.push(batch);
      user.batch_count += 1;
      return reply(200, {
        batch_number: batch.batch_number,
        state: batch.state,
        created_at: batch.created_at,
      });
    }

    const uploadMatch = path.match(/^\/api\/batches\/([^/]+)\/images$/);
    if (method === 'POST' && uploadMatch) {
      const batch = this.batches.find((b) => b.batch_number === uploadMatch[1]);
      if (!batch) return fail(404, 'UnknownBatch');
      if (batch.owner_id !== user.id) return fail(403, 'NotOwner');
      if (batch.state !== 'Open') return fail(409, 'BatchClosed');
      const file = (init?.body as FormData).get('file') as File;
      // Filename conventions stand in for real image content.
      if (file.name.includes('junk')) return fail(400, 'BadImage', 'not a decodable image');
      if (file.name.includes('blurry')) {
        batch.images.push({ original_filename: file.name, result: null, failure: 'low conf' });
        return reply(200, {
          image_id: batch.images.length,
          original_filename: file.name,
          batch_number: batch.batch_number,
          result: null,
          failure: {
            error: 'LowConfidenceInstrument',
            message: 'below threshold',
            instrument_guess: 'Scalpel',
            confidence: 0.3,
          },
        });
      }
      const defective = file.name.includes('crack');
      const result: InspectionResult = {
        instrument: 'Scalpel',
        instrument_confidence: 0.98,
        defects: defective ? [['Crack', 0.91]] : [],
        overall: defective ? 'Defective' : 'NonDefective',
        backend_ids: ['stub-instrument', 'stub-defect-scalpel'],
        timing_ms: { instrument: 1, defects: 1 },
      };
      batch.images.push({ original_filename: file.name, result, failure: null });
      batch.stats.total_inspected += 1;
      if (defective) {
        batch.stats.defected += 1;
        batch.stats.per_defect_class['Crack'] = (batch.stats.per_defect_class['Crack'] ?? 0) + 1;
      } else {
        batch.stats.non_defected += 1;
      }
      return reply(200, {
        image_id: batch.images.length,
        original_filename: file.name,
        batch_number: batch.batch_number,
        result,
      });
    }

    const statsMatch = path.match(/^\/api\/batches\/([^/]+)\/stats$/);
    if (method === 'GET' && statsMatch) {
      const batch = this.batches.find((b) => b.batch_number === statsMatch[1]);
      if (!batch) return fail(404, 'UnknownBatch');
      return reply(200, { ...(this.statsOverride ?? batch.stats) });
    }

    const closeMatch = path.match(/^\/api\/batches\/([^/]+)\/close$/);
    if (method === 'POST' && closeMatch) {
      const batch = this.batches.find((b) => b.batch_number === closeMatch[1]);
      if (!batch) return fail(404, 'UnknownBatch');
      batch.state = 'Closed';
      return reply(200, {
        batch_number: batch.batch_number,
        state: batch.state,
        created_at: batch.created_at,
      });
    }

    if (path.startsWith('/api/admin') && user.role !== 'Admin') {
      return fail(403, 'NonAdmin');
    }

    if (method === 'GET' && path === '/api/admin/users') {
      return reply(200, {
        users: this.users.map(({ password: _pw, ...u }) => u),
      });
    }

    const patchMatch = path.match(/^\/api\/admin\/users\/(\d+)$/);
    if (method === 'PATCH' && patchMatch) {
      const target = this.users.find((u) => u.id === Number(patchMatch[1]));
      if (!target) return fail(404, 'UnknownUser');
      const patch = JSON.parse(String(init?.body ?? '{}'));
      if (patch.status) target.status = patch.status;
      if (patch.name) target.name = patch.name;
      if (patch.role) target.role = patch.role;
      const { password: _pw, batch_count: _bc, ...info } = target;
      return reply(200, info);
    }

    if (method === 'GET' && path === '/api/admin/overview') {
      return reply(200, {
        batches: this.batches.map((b) => ({
          batch_number: b.batch_number,
          state: b.state,
          created_at: b.created_at,
          owner: {
            id: b.owner_id,
            name: this.users.find((u) => u.id === b.owner_id)?.name ?? '?',
          },
          stats: b.stats,
        })),
      });
    }

    return fail(404, 'NotFound', `no route for ${method} ${path}`);
  }
}

export async function flush(): Promise<void> {
  for (let i = 0; i < 4; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
