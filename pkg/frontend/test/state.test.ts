import { describe, expect, it } from "vitest";

import type { Candidate } from "../src/api.js";
import { PAGE_SIZE, ViewState } from "../src/state.js";

function candidates(n: number): Candidate[] {
  return Array.from({ length: n }, (_, i) => ({
    text: `字${i}`,
    score: -i,
  }));
}

describe("pagination", () => {
  it("maps page and slot to global rank p*5+i", () => {
    const state = new ViewState();
    state.applyConversion(state.nextRequestId(), 1, candidates(12));
    for (let page = 0; page < 3; page++) {
      for (let i = 0; i < PAGE_SIZE; i++) {
        state.turn!.pageIndex = page;
        const rank = state.globalRank(i);
        expect(rank).toBe(page * PAGE_SIZE + i);
        const cand = state.candidateAt(i);
        if (rank < 12) {
          expect(cand?.text).toBe(`字${rank}`);
        } else {
          expect(cand).toBeNull();
        }
      }
    }
  });

  it("renders at most PAGE_SIZE candidates per page", () => {
    const state = new ViewState();
    state.applyConversion(state.nextRequestId(), 1, candidates(12));
    expect(state.currentPage().length).toBe(5);
    state.turnPage(1);
    expect(state.currentPage().length).toBe(5);
    state.turnPage(1);
    expect(state.currentPage().length).toBe(2);
  });

  it("page past either end is a no-op", () => {
    const state = new ViewState();
    state.applyConversion(state.nextRequestId(), 1, candidates(7));
    expect(state.turnPage(-1)).toBe(false);
    expect(state.turn!.pageIndex).toBe(0);
    expect(state.turnPage(1)).toBe(true);
    expect(state.turnPage(1)).toBe(false);
    expect(state.turn!.pageIndex).toBe(1);
  });

  it("page count covers a partial last page", () => {
    const state = new ViewState();
    state.applyConversion(state.nextRequestId(), 1, candidates(11));
    expect(state.pageCount()).toBe(3);
  });
});

describe("stale responses", () => {
  it("discards a conversion from an older request", () => {
    const state = new ViewState();
    const first = state.nextRequestId();
    const second = state.nextRequestId();
    expect(state.applyConversion(first, 1, candidates(3))).toBe(false);
    expect(state.turn).toBeNull();
    expect(state.applyConversion(second, 2, candidates(4))).toBe(true);
    expect(state.turn!.turnId).toBe(2);
  });
});

describe("commits", () => {
  it("committed text only grows through selections", () => {
    const state = new ViewState();
    state.applyConversion(state.nextRequestId(), 1, candidates(3));
    state.inputBuffer = "zi";
    state.commit("字0", [], 10);
    expect(state.committedText).toBe("字0");
    expect(state.inputBuffer).toBe("");
    expect(state.turn).toBeNull();
    state.applyConversion(state.nextRequestId(), 2, candidates(3));
    state.commit("字1", ["字1"], 11);
    expect(state.committedText).toBe("字0字1");
    expect(state.vocabSize).toBe(11);
  });

  it("added words surface as toasts", () => {
    const state = new ViewState();
    state.applyConversion(state.nextRequestId(), 1, candidates(2));
    state.commit("字0", ["新词"], 5);
    expect(state.eventLog.at(-1)).toEqual({
      kind: "toast",
      message: "new word: 新词",
    });
  });
});
