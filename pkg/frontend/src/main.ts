import { ApiClient } from "./api.js";
import { UISession } from "./session.js";
import {
  clearMessages,
  renderError,
  renderModelOptions,
  renderPairCards,
} from "./render.js";
import type { ModelInfo } from "./types.js";

const client = new ApiClient("");
const session = new UISession();

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const paragraphBox = byId<HTMLTextAreaElement>("paragraph");
const languageSelect = byId<HTMLSelectElement>("language");
const modelSelect = byId<HTMLSelectElement>("model");
const beamInput = byId<HTMLInputElement>("beam-size");
const beamValue = byId<HTMLSpanElement>("beam-size-value");
const topPInput = byId<HTMLInputElement>("top-p");
const topPValue = byId<HTMLSpanElement>("top-p-value");
const pinButton = byId<HTMLButtonElement>("pin-answer");
const clearPinButton = byId<HTMLButtonElement>("clear-pin");
const pinnedLabel = byId<HTMLSpanElement>("pinned-answer");
const submitButton = byId<HTMLButtonElement>("submit");
const submitHint = byId<HTMLSpanElement>("submit-hint");
const spinner = byId<HTMLSpanElement>("spinner");
const messages = byId<HTMLDivElement>("messages");
const resultsBox = byId<HTMLDivElement>("results");

let models: ModelInfo[] = [];

function syncControls(): void {
  session.setParagraph(paragraphBox.value);
  session.setParams(Number(beamInput.value), Number(topPInput.value));
  session.modelId = modelSelect.value || null;
  beamValue.textContent = beamInput.value;
  topPValue.textContent = Number(topPInput.value).toFixed(2);
  pinnedLabel.textContent = session.pinnedAnswer ?? "none";
  clearPinButton.disabled = session.pinnedAnswer === null;
  submitButton.disabled = !session.canSubmit() || session.busy;
  submitHint.textContent = session.submitBlockedReason() ?? "";
  spinner.hidden = !session.busy;
}

function showOutcome(): void {
  clearMessages(messages);
  if (session.lastError) {
    renderError(messages, session.lastError);
    const retry = messages.querySelector<HTMLButtonElement>(".retry-button");
    retry?.addEventListener("click", () => void runGeneration());
  } else if (session.results) {
    renderPairCards(resultsBox, session.results);
  }
}

async function runGeneration(): Promise<void> {
  syncControls();
  const submission = session.submit(client);
  syncControls();
  await submission;
  syncControls();
  showOutcome();
}

async function loadModels(): Promise<void> {
  try {
    models = await client.listModels();
  } catch {
    models = [];
  }
  renderModelOptions(modelSelect, models, languageSelect.value || null);
  syncControls();
}

paragraphBox.addEventListener("input", syncControls);
beamInput.addEventListener("input", syncControls);
topPInput.addEventListener("input", syncControls);
modelSelect.addEventListener("change", syncControls);
languageSelect.addEventListener("change", () => {
  renderModelOptions(modelSelect, models, languageSelect.value || null);
  syncControls();
});

pinButton.addEventListener("click", () => {
  session.setParagraph(paragraphBox.value);
  session.pinFromSelection(paragraphBox.selectionStart, paragraphBox.selectionEnd);
  syncControls();
});

clearPinButton.addEventListener("click", () => {
  session.clearPin();
  syncControls();
});

submitButton.addEventListener("click", () => void runGeneration());

void loadModels();
