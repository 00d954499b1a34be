/** Glue between keystrokes, the view state and the service API.
 *
 * Input is debounced; only the newest conversion may render. Selection is
 * the single action that mutates server state.
 */

import { ApiClient, ApiError } from "./api.js";
import { PAGE_SIZE, ViewState } from "./state.js";

export class ImeController {
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private pending: Promise<void> = Promise.resolve();

  constructor(
    readonly api: ApiClient,
    readonly state: ViewState,
    private readonly debounceMs = 120,
    private readonly onRender: () => void = () => {},
  ) {}

  async start(): Promise<void> {
    this.state.sessionId = await this.api.createSession();
    const stats = await this.api.stats();
    this.state.vocabSize = stats.vocab_size;
    this.onRender();
  }

  /** Buffer change: debounce, then convert; empty buffer clears the strip. */
  onInput(buffer: string): void {
    this.state.inputBuffer = buffer;
    if (this.debounceTimer !== null) {
      clearTimeout(this.debounceTimer);
      this.debounceTimer = null;
    }
    if (!buffer) {
      this.state.clearTurn();
      this.onRender();
      return;
    }
    const requestId = this.state.nextRequestId();
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      this.pending = this.convertNow(requestId, buffer);
    }, this.debounceMs);
    this.onRender();
  }

  private async convertNow(requestId: number, buffer: string): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const resp = await this.api.convert(this.state.sessionId, buffer);
      if (this.state.applyConversion(requestId, resp.turn_id, resp.candidates)) {
        this.onRender();
      }
    } catch (err) {
      if (err instanceof ApiError && err.errorCode === "unsegmentable") {
        this.state.pushEvent(
          "error",
          `cannot segment at letter ${(err.offset ?? 0) + 1}`,
        );
      } else {
        this.state.pushEvent("error", String(err));
      }
      this.state.clearTurn();
      this.onRender();
    }
  }

  /** Wait for any in-flight conversion (used by tests). */
  flush(): Promise<void> {
    return this.pending;
  }

  onPageTurn(direction: 1 | -1): void {
    if (this.state.turnPage(direction)) {
      this.onRender();
    }
  }

  /** Select the candidate at a slot of the current page (0-based). */
  async onSelect(indexOnPage: number): Promise<void> {
    const candidate = this.state.candidateAt(indexOnPage);
    if (!candidate) return;
    await this.selectText(candidate.text);
  }

  /** Free-text commit: any string the user typed in place of a candidate. */
  async selectText(text: string): Promise<void> {
    const { sessionId, turn } = this.state;
    if (!sessionId || !turn) return;
    try {
      const resp = await this.api.select(sessionId, turn.turnId, text);
      this.state.commit(text, resp.added_words, resp.vocab_size);
      if (resp.flush_performed) {
        this.state.pushEvent("info", "online training pass completed");
      }
    } catch (err) {
      // keep the buffer so the user can correct instead of retyping
      if (err instanceof ApiError) {
        this.state.pushEvent("error", `${err.errorCode}: ${err.message}`);
      } else {
        this.state.pushEvent("error", String(err));
      }
    }
    this.onRender();
  }

  /** Keyboard-first bindings: digits select, space takes the top-1,
   *  '=' or PageDown pages forward, '-' or PageUp pages back. */
  handleKey(key: string): boolean {
    if (!this.state.turn) return false;
    if (key >= "1" && key <= String(PAGE_SIZE)) {
      void this.onSelect(Number(key) - 1);
      return true;
    }
    if (key === " ") {
      const top = this.state.turn.candidates[0];
      if (top) void this.selectText(top.text);
      return true;
    }
    if (key === "=" || key === "PageDown") {
      this.onPageTurn(1);
      return true;
    }
    if (key === "-" || key === "PageUp") {
      this.onPageTurn(-1);
      return true;
    }
    return false;
  }
}
