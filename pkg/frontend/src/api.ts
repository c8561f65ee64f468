// Typed client for the SurgScan REST API. Every number shown in the UI
// comes from these responses; nothing is computed client-side.

export interface UserInfo {
  id: number;
  name: string;
  email: string;
  role: 'Admin' | 'User';
  status: 'Active' | 'Inactive';
}

export interface AdminUser extends UserInfo {
  batch_count: number;
}

export interface LoginResponse {
  token: string;
  role: 'Admin' | 'User';
  user: UserInfo;
  open_batch: string | null;
}

export interface InspectionResult {
  instrument: string;
  instrument_confidence: number;
  defects: [string, number][];
  overall: 'Defective' | 'NonDefective';
  backend_ids: string[];
  timing_ms: { instrument: number; defects: number };
}

export interface InspectionFailure {
  error: string;
  message?: string;
  instrument_guess?: string;
  confidence?: number;
  threshold?: number;
}

export interface UploadResponse {
  batch_number: string;
  image_id: number;
  original_filename: string;
  result: InspectionResult | null;
  failure?: InspectionFailure;
}

export interface BatchStats {
  total_inspected: number;
  defected: number;
  non_defected: number;
  per_defect_class: Record<string, number>;
}

export interface BatchSummary {
  batch_number: string;
  state: 'Open' | 'Closed';
  created_at: string;
}

export interface BatchImage {
  id: number;
  original_filename: string;
  uploaded_at?: string;
  result: InspectionResult | null;
  failure: string | null;
}

export interface BatchDetail extends BatchSummary {
  owner: { id: number; name: string };
  images: BatchImage[];
  stats: BatchStats;
}

export interface OverviewBatch extends BatchSummary {
  owner: { id: number; name: string };
  stats: BatchStats;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

type FetchLike = typeof fetch;

export class SurgScanApi {
  token: string | null = null;

  constructor(
    private baseUrl: string = '',
    private fetchImpl: FetchLike = (...args) => globalThis.fetch(...args),
  ) {}

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers = new Headers(init.headers);
    if (this.token) {
      headers.set('Authorization', `Bearer ${this.token}`);
    }
    let res: Response;
    try {
      res = await this.fetchImpl(`${this.baseUrl}${path}`, { ...init, headers });
    } catch (err) {
      throw new ApiError(0, 'NetworkError', String(err));
    }
    if (!res.ok) {
      let code = 'HttpError';
      let message = `${res.status} on ${path}`;
      try {
        const body = (await res.json()) as { error?: string; message?: string };
        if (body.error) code = body.error;
        if (body.message) message = body.message;
      } catch {
        // non-JSON error body; keep the fallback message
      }
      throw new ApiError(res.status, code, message);
    }
    return (await res.json()) as T;
  }

  private json<T>(path: string, method: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method,
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request('/api/health');
  }

  async login(email: string, password: string): Promise<LoginResponse> {
    const res = await this.json<LoginResponse>('/api/login', 'POST', { email, password });
    this.token = res.token;
    return res;
  }

  createBatch(): Promise<BatchSummary> {
    return this.request('/api/batches', { method: 'POST' });
  }

  uploadImage(batchNumber: string, file: File): Promise<UploadResponse> {
    const form = new FormData();
    form.append('file', file, file.name);
    return this.request(`/api/batches/${batchNumber}/images`, {
      method: 'POST',
      body: form,
    });
  }

  batchDetail(batchNumber: string): Promise<BatchDetail> {
    return this.request(`/api/batches/${batchNumber}`);
  }

  batchStats(batchNumber: string): Promise<BatchStats> {
    return this.request(`/api/batches/${batchNumber}/stats`);
  }

  closeBatch(batchNumber: string): Promise<BatchSummary> {
    return this.request(`/api/batches/${batchNumber}/close`, { method: 'POST' });
  }

  adminUsers(): Promise<{ users: AdminUser[] }> {
    return this.request('/api/admin/users');
  }

  updateUser(
    id: number,
    patch: Partial<Pick<UserInfo, 'name' | 'role' | 'status'>>,
  ): Promise<UserInfo> {
    return this.json(`/api/admin/users/${id}`, 'PATCH', patch);
  }

  adminOverview(): Promise<{ batches: OverviewBatch[] }> {
    return this.request('/api/admin/overview');
  }
}
