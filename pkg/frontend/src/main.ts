/** DOM wiring for the candidate strip, committed text and event log. */

import { ApiClient } from "./api.js";
import { ImeController } from "./controller.js";
import { PAGE_SIZE, ViewState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const state = new ViewState();
const controller = new ImeController(new ApiClient(""), state, 120, render);

const input = el<HTMLInputElement>("pinyin-input");
const strip = el<HTMLDivElement>("candidate-strip");
const pageLabel = el<HTMLSpanElement>("page-label");
const committed = el<HTMLDivElement>("committed-text");
const vocabCounter = el<HTMLSpanElement>("vocab-counter");
const events = el<HTMLUListElement>("event-log");

function render(): void {
  committed.textContent = state.committedText;
  vocabCounter.textContent = String(state.vocabSize);
  input.value = state.inputBuffer;

  strip.replaceChildren();
  const page = state.currentPage();
  page.forEach((candidate, i) => {
    const cell = document.createElement("button");
    cell.className = "candidate";
    cell.textContent = `${i + 1}. ${candidate.text}`;
    cell.onclick = () => void controller.onSelect(i);
    strip.appendChild(cell);
  });
  strip.classList.toggle("hidden", page.length === 0);
  pageLabel.textContent = state.turn
    ? `page ${state.turn.pageIndex + 1}/${state.pageCount()}`
    : "";

  events.replaceChildren();
  for (const entry of state.eventLog.slice(-8).reverse()) {
    const li = document.createElement("li");
    li.className = entry.kind;
    li.textContent = entry.message;
    events.appendChild(li);
  }
}

input.addEventListener("input", () => controller.onInput(input.value));
input.addEventListener("keydown", (ev) => {
  if (ev.key >= "1" && ev.key <= String(PAGE_SIZE) && state.turn) {
    ev.preventDefault();
  }
  if (controller.handleKey(ev.key)) {
    ev.preventDefault();
  }
});

void controller.start().catch((err) => {
  state.pushEvent("error", `cannot reach service: ${err}`);
  render();
});
