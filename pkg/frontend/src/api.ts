/** Typed client for the /v1 loop-editing service. */

import {
  ApiErrorJson,
  EditSpecJson,
  LoopListJson,
  LoopRecordJson,
  SamplerOptionsJson,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorJson,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const text = await response.text();
    const body = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, body as ApiErrorJson);
    }
    return body as T;
  }

  generate(spec: EditSpecJson | null, sampler: SamplerOptionsJson = {}): Promise<LoopRecordJson> {
    return this.request("/v1/generate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ spec, sampler }),
    });
  }

  edit(
    id: string,
    action: string,
    args: Record<string, unknown>,
    sampler: SamplerOptionsJson = {},
  ): Promise<LoopRecordJson> {
    return this.request(`/v1/loops/${id}/edit`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ action, args, sampler }),
    });
  }

  getLoop(id: string): Promise<LoopRecordJson> {
    return this.request(`/v1/loops/${id}`);
  }

  listLoops(offset = 0, limit = 50): Promise<LoopListJson> {
    return this.request(`/v1/loops?offset=${offset}&limit=${limit}`);
  }

  health(): Promise<{ status: string; model_loaded: boolean }> {
    return this.request("/v1/health");
  }

  midiUrl(id: string): string {
    return `${this.baseUrl}/v1/loops/${id}/midi`;
  }
}
