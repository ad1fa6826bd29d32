// Typed client for the refraction session service.

export interface SessionConfig {
  rule?: string;
  iterations?: number;
  seed?: number;
  slope?: number;
  calibration?: number;
  simulated?: boolean;
}

export interface Stimulus {
  letter: string;
  size_px: number;
}

export interface Trial {
  done: boolean;
  iteration: number;
  s?: number;
  x?: [number, number];
  stimulus?: Stimulus;
}

export interface EstimatePoint {
  iter: number;
  va: number;
}

export interface Estimate {
  x_hat: [number, number];
  va_curve: EstimatePoint[];
}

export interface ApiError {
  code: string;
  message: string;
}

export class ServerError extends Error {
  constructor(public status: number, public body: ApiError) {
    super(`${body.code}: ${body.message}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    const body = await resp.json();
    if (!resp.ok) {
      throw new ServerError(resp.status, body as ApiError);
    }
    return body as T;
  }

  createSession(config: SessionConfig): Promise<{ id: string }> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify(config),
    });
  }

  getTrial(id: string): Promise<Trial> {
    return this.request(`/sessions/${id}/trial`);
  }

  submitResponse(id: string, c: 0 | 1, iteration: number): Promise<Trial> {
    return this.request(`/sessions/${id}/response`, {
      method: "POST",
      body: JSON.stringify({ c, iteration }),
    });
  }

  getEstimate(id: string): Promise<Estimate> {
    return this.request(`/sessions/${id}/estimate`);
  }

  closeSession(id: string): Promise<{ closed: boolean }> {
    return this.request(`/sessions/${id}`, { method: "DELETE" });
  }
}
