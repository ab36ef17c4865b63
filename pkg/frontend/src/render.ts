import type { ModelInfo, QaPair } from "./types.js";
import type { SessionError } from "./session.js";

/** User-facing messages keyed by API error code. */
export const ERROR_MESSAGES: Record<string, string> = {
  unknown_model: "The selected model is not registered on the server.",
  invalid_paragraph: "The paragraph is empty or too long for this service.",
  answer_not_in_paragraph: "The pinned answer does not occur in the paragraph.",
  validation_error: "The request was rejected — check the parameters.",
  unknown_metric: "The server does not support that metric.",
  backend_error: "The model backend failed. Try again in a moment.",
  backend_timeout: "The model backend timed out.",
  too_many_requests: "The server is at capacity — try again shortly.",
  network: "Could not reach the server.",
};

/** Render one card per pair, strictly in the order the API returned them. */
export function renderPairCards(container: HTMLElement, pairs: QaPair[]): void {
  container.replaceChildren();
  pairs.forEach((pair, rank) => {
    const card = document.createElement("article");
    card.className = "qa-card";
    card.dataset.rank = String(rank);

    const question = document.createElement("p");
    question.className = "qa-question";
    question.textContent = pair.question;

    const answer = document.createElement("p");
    answer.className = "qa-answer";
    answer.textContent = pair.answer;

    const badges = document.createElement("div");
    badges.className = "qa-badges";
    const overlap = document.createElement("span");
    overlap.className = "badge badge-overlap";
    overlap.textContent = `overlap ${pair.overlap.toFixed(3)}`;
    overlap.title = "Lexical overlap with the paragraph; lower ranks first.";
    badges.append(overlap);
    if (pair.perplexity !== null) {
      const ppl = document.createElement("span");
      ppl.className = "badge badge-perplexity";
      ppl.textContent = `ppl ${pair.perplexity.toFixed(2)}`;
      badges.append(ppl);
    }

    card.append(question, answer, badges);
    container.append(card);
  });
}

export function renderError(container: HTMLElement, error: SessionError): void {
  container.replaceChildren();
  const box = document.createElement("div");
  box.className = "error-message";
  box.dataset.code = error.code;
  box.textContent = ERROR_MESSAGES[error.code] ?? error.message;
  if (error.retryable) {
    const retry = document.createElement("button");
    retry.className = "retry-button";
    retry.type = "button";
    retry.textContent = "Retry";
    box.append(retry);
  }
  container.append(box);
}

export function clearMessages(container: HTMLElement): void {
  container.replaceChildren();
}

/** Fill the model dropdown, keeping only models for the given language. */
export function renderModelOptions(
  select: HTMLSelectElement,
  models: ModelInfo[],
  language: string | null,
): void {
  select.replaceChildren();
  const shown = language ? models.filter((m) => m.language === language) : models;
  for (const model of shown) {
    const option = document.createElement("option");
    option.value = model.id;
    option.textContent = `${model.id} (${model.language})`;
    select.append(option);
  }
  select.disabled = shown.length === 0;
}
