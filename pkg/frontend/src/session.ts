import { ApiClient, ApiError } from "./api.js";
import type { GenerateQaRequest, GenerateQuestionRequest, QaPair } from "./types.js";

export interface SessionError {
  code: string;
  message: string;
  retryable: boolean;
}

/**
 * State for one user session: paragraph, model choice, decoding parameters,
 * optional pinned answer, and the last completed results.
 *
 * One generation is in flight at a time: a new submission aborts the pending
 * request, but completed results are only ever replaced by newer completed
 * results, never reordered or partially merged.
 */
export class UISession {
  modelId: string | null = null;
  paragraph = "";
  beamSize = 4;
  topP = 0.95;
  pinnedAnswer: string | null = null;
  results: QaPair[] | null = null;
  lastError: SessionError | null = null;
  busy = false;

  private controller: AbortController | null = null;

  setParagraph(text: string): void {
    this.paragraph = text;
  }

  setParams(beamSize: number, topP: number): void {
    this.beamSize = beamSize;
    this.topP = topP;
  }

  paramsValid(): boolean {
    return (
      Number.isInteger(this.beamSize) &&
      this.beamSize >= 1 &&
      this.topP > 0 &&
      this.topP <= 1
    );
  }

  /**
   * Pin the answer from a selection range inside the paragraph box.
   * Whitespace-only selections are ignored; returns the pinned text or null.
   */
  pinFromSelection(start: number, end: number): string | null {
    const [lo, hi] = start <= end ? [start, end] : [end, start];
    const selected = this.paragraph.slice(lo, hi);
    if (!selected.trim()) {
      return null;
    }
    this.pinnedAnswer = selected;
    return selected;
  }

  clearPin(): void {
    this.pinnedAnswer = null;
  }

  pinnedAnswerPresent(): boolean {
    return this.pinnedAnswer !== null && this.paragraph.includes(this.pinnedAnswer);
  }

  /** Submission is enabled only for a sane request the server could accept. */
  canSubmit(): boolean {
    if (!this.modelId || !this.paragraph.trim() || !this.paramsValid()) {
      return false;
    }
    if (this.pinnedAnswer !== null && !this.pinnedAnswerPresent()) {
      return false;
    }
    return true;
  }

  /** Hint for the disabled submit button, or null when submission is allowed. */
  submitBlockedReason(): string | null {
    if (!this.modelId) return "Pick a model first.";
    if (!this.paragraph.trim()) return "Enter a paragraph first.";
    if (!this.paramsValid()) return "Decoding parameters are out of range.";
    if (this.pinnedAnswer !== null && !this.pinnedAnswerPresent()) {
      return "The pinned answer no longer appears in the paragraph.";
    }
    return null;
  }

  buildRequestBody(): GenerateQaRequest | GenerateQuestionRequest {
    const base: GenerateQaRequest = {
      model_id: this.modelId ?? "",
      paragraph: this.paragraph,
      beam_size: this.beamSize,
      top_p: this.topP,
    };
    if (this.pinnedAnswer !== null) {
      return { ...base, answer: this.pinnedAnswer };
    }
    return base;
  }

  /**
   * Run one generation. Calls /v1/generate_question when an answer is
   * pinned, /v1/generate_qa otherwise, and stores results in API order.
   */
  async submit(client: ApiClient): Promise<void> {
    if (!this.canSubmit()) {
      return;
    }
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    this.busy = true;
    this.lastError = null;
    try {
      let pairs: QaPair[];
      const body = this.buildRequestBody();
      if (this.pinnedAnswer !== null) {
        const res = await client.generateQuestion(
          body as GenerateQuestionRequest,
          controller.signal,
        );
        pairs = [
          {
            question: res.question,
            answer: this.pinnedAnswer,
            overlap: res.overlap,
            perplexity: null,
          },
        ];
      } else {
        const res = await client.generateQa(body, controller.signal);
        pairs = res.pairs;
      }
      this.results = pairs;
    } catch (err) {
      if (controller.signal.aborted) {
        return; // superseded by a newer submission; keep completed results
      }
      if (err instanceof ApiError) {
        this.lastError = { code: err.code, message: err.message, retryable: false };
      } else {
        this.lastError = {
          code: "network",
          message: err instanceof Error ? err.message : String(err),
          retryable: true,
        };
      }
    } finally {
      if (this.controller === controller) {
        this.busy = false;
        this.controller = null;
      }
    }
  }
}
