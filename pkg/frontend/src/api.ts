import type {
  ClassifyResult,
  ClustersPayload,
  LabelPutResult,
  ModelInfo,
} from "./types.js";

/** The service answered with an error status (payload carries the message). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** fetch() itself failed: wrong URL, service down, network gone. */
export class ServiceUnreachableError extends Error {
  constructor(baseUrl: string, cause: unknown) {
    super(`service at ${baseUrl} is unreachable`);
    this.name = "ServiceUnreachableError";
    this.cause = cause;
  }
}

export interface ResponseLogEntry {
  method: string;
  path: string;
  payload: unknown;
}

/**
 * Thin typed client for the /v1 endpoints. Every number the console
 * displays flows through here, so an onResponse hook can log the raw
 * payloads for provenance checks in tests.
 */
export class ConsoleApi {
  readonly baseUrl: string;
  onResponse?: (entry: ResponseLogEntry) => void;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}${path}`, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ServiceUnreachableError(this.baseUrl, err);
    }
    let payload: unknown;
    try {
      payload = await response.json();
    } catch {
      throw new ApiError(response.status, `non-JSON response (${response.status})`);
    }
    if (!response.ok) {
      const message =
        payload && typeof payload === "object" && "error" in payload
          ? String((payload as { error: unknown }).error)
          : `request failed (${response.status})`;
      throw new ApiError(response.status, message);
    }
    this.onResponse?.({ method, path, payload });
    return payload as T;
  }

  modelInfo(): Promise<ModelInfo> {
    return this.request<ModelInfo>("GET", "/v1/model/info");
  }

  clusters(): Promise<ClustersPayload> {
    return this.request<ClustersPayload>("GET", "/v1/clusters");
  }

  classify(fft: number[]): Promise<ClassifyResult> {
    return this.request<ClassifyResult>("POST", "/v1/classify", { fft });
  }

  embed(fft: number[]): Promise<{ embedding: number[] }> {
    return this.request<{ embedding: number[] }>("POST", "/v1/embed", { fft });
  }

  setLabel(clusterId: number, label: string): Promise<LabelPutResult> {
    return this.request<LabelPutResult>("PUT", `/v1/clusters/${clusterId}/label`, { label });
  }
}
