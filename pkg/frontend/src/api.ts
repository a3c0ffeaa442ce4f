import type {
  DatasetBody,
  IndexStats,
  QueryRequest,
  QueryResponse,
  SessionBody,
} from './types.js';

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/** Thin typed client over the service endpoints; fetch is injectable so
 * tests can count and stub requests. */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { 'content-type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = (await res.json()) as Record<string, unknown>;
    if (res.status >= 400) {
      throw new ApiError(res.status, String(doc['detail'] ?? res.status));
    }
    return doc as T;
  }

  async health(): Promise<boolean> {
    const doc = await this.request<{ status: string }>('GET', '/healthz');
    return doc.status === 'ok';
  }

  async createDataset(body: DatasetBody): Promise<string> {
    const doc = await this.request<{ dataset_id: string }>('POST', '/datasets', body);
    return doc.dataset_id;
  }

  async createSession(body: SessionBody): Promise<string> {
    const doc = await this.request<{ session_id: string }>('POST', '/sessions', body);
    return doc.session_id;
  }

  query(sessionId: string, body: QueryRequest): Promise<QueryResponse> {
    return this.request('POST', `/sessions/${sessionId}/query`, body);
  }

  indexStats(sessionId: string): Promise<IndexStats> {
    return this.request('GET', `/sessions/${sessionId}/index-stats`);
  }
}
