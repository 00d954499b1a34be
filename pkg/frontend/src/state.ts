/** Pure view state: pagination, stale-response handling, commit log.
 *
 * The candidate shown at page p, slot i always has global rank
 * p * PAGE_SIZE + i, matching the engine's stable pagination contract.
 */

import type { Candidate } from "./api.js";

export const PAGE_SIZE = 5;

export interface TurnView {
  turnId: number;
  candidates: Candidate[];
  pageIndex: number;
}

export interface EventEntry {
  kind: "toast" | "error" | "info";
  message: string;
}

export class ViewState {
  sessionId: string | null = null;
  inputBuffer = "";
  turn: TurnView | null = null;
  committedText = "";
  vocabSize = 0;
  eventLog: EventEntry[] = [];
  /** id of the newest conversion request; older responses are discarded */
  requestCounter = 0;

  nextRequestId(): number {
    return ++this.requestCounter;
  }

  /** Install a conversion result unless a newer request was issued since. */
  applyConversion(
    requestId: number,
    turnId: number,
    candidates: Candidate[],
  ): boolean {
    if (requestId !== this.requestCounter) {
      return false; // stale response from an earlier keystroke
    }
    this.turn = { turnId, candidates, pageIndex: 0 };
    return true;
  }

  clearTurn(): void {
    this.turn = null;
  }

  pageCount(): number {
    if (!this.turn || this.turn.candidates.length === 0) return 0;
    return Math.ceil(this.turn.candidates.length / PAGE_SIZE);
  }

  currentPage(): Candidate[] {
    if (!this.turn) return [];
    const start = this.turn.pageIndex * PAGE_SIZE;
    return this.turn.candidates.slice(start, start + PAGE_SIZE);
  }

  globalRank(indexOnPage: number): number {
    if (!this.turn) return -1;
    return this.turn.pageIndex * PAGE_SIZE + indexOnPage;
  }

  candidateAt(indexOnPage: number): Candidate | null {
    if (!this.turn) return null;
    return this.turn.candidates[this.globalRank(indexOnPage)] ?? null;
  }

  /** Move by one page; out-of-range turns are no-ops. */
  turnPage(direction: 1 | -1): boolean {
    if (!this.turn) return false;
    const next = this.turn.pageIndex + direction;
    if (next < 0 || next >= this.pageCount()) return false;
    this.turn.pageIndex = next;
    return true;
  }

  /** Commit a selection; committed text only ever grows. */
  commit(text: string, addedWords: string[], vocabSize: number): void {
    this.committedText += text;
    this.vocabSize = vocabSize;
    this.inputBuffer = "";
    this.turn = null;
    for (const word of addedWords) {
      this.pushEvent("toast", `new word: ${word}`);
    }
  }

  pushEvent(kind: EventEntry["kind"], message: string): void {
    this.eventLog.push({ kind, message });
    if (this.eventLog.length > 50) {
      this.eventLog.shift();
    }
  }
}
