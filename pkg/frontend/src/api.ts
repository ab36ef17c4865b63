import type {
  GenerateQaRequest,
  GenerateQaResponse,
  GenerateQuestionRequest,
  GenerateQuestionResponse,
  ModelInfo,
} from "./types.js";

/** Error carrying the server's {error: {code, message}} payload. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(res: Response): Promise<ApiError> {
  try {
    const body = await res.json();
    if (body && body.error && typeof body.error.code === "string") {
      return new ApiError(res.status, body.error.code, body.error.message ?? "");
    }
  } catch {
    // fall through: server did not send the structured error shape
  }
  return new ApiError(res.status, "unknown_error", `HTTP ${res.status}`);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    const res = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!res.ok) {
      throw await parseError(res);
    }
    return (await res.json()) as T;
  }

  async listModels(): Promise<ModelInfo[]> {
    const res = await fetch(`${this.baseUrl}/v1/models`);
    if (!res.ok) {
      throw await parseError(res);
    }
    return (await res.json()) as ModelInfo[];
  }

  generateQa(body: GenerateQaRequest, signal?: AbortSignal): Promise<GenerateQaResponse> {
    return this.post<GenerateQaResponse>("/v1/generate_qa", body, signal);
  }

  generateQuestion(
    body: GenerateQuestionRequest,
    signal?: AbortSignal,
  ): Promise<GenerateQuestionResponse> {
    return this.post<GenerateQuestionResponse>("/v1/generate_question", body, signal);
  }
}
