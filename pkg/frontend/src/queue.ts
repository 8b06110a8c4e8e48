/** Review queue state: server-ordered cards, one in-flight verdict, optimistic
 * updates that roll back on server errors. The UI renders this state and never
 * derives counts itself; stats always come back from the service. */

import { Candidate, Decision, Stats, VerdictOutcome } from "./api.js";

/** The slice of the HTTP client the queue depends on (ApiClient satisfies it). */
export interface CurationApi {
  getCandidates(opts: { group?: string; page?: number; pageSize?: number }): Promise<Candidate[]>;
  getStats(): Promise<Stats>;
  submitVerdict(body: {
    sample_id: string;
    decision: Decision;
    reason?: string;
    new_label?: string;
  }): Promise<VerdictOutcome>;
}

export type CardPhase = "pending" | "submitting";

export interface Card {
  candidate: Candidate;
  phase: CardPhase;
  error?: string;
  relabeledTo?: string;
}

export interface QueueEvent {
  kind: "loaded" | "verdict" | "error" | "stats";
  message?: string;
}

export type Listener = (event: QueueEvent) => void;

export class ReviewQueue {
  cards: Card[] = [];
  focus = 0;
  page = 0;
  group: string | undefined;
  pageSize: number;
  stats: Stats | null = null;
  /** Set when the service cannot be reached; cleared by a successful call. */
  offlineError: string | null = null;
  loaded = false;

  private inflight: Promise<unknown> = Promise.resolve();
  private listeners: Listener[] = [];

  constructor(
    private readonly api: CurationApi,
    opts: { pageSize?: number } = {},
  ) {
    this.pageSize = opts.pageSize ?? 12;
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(event: QueueEvent): void {
    for (const fn of this.listeners) fn(event);
  }

  get focused(): Card | undefined {
    return this.cards[this.focus];
  }

  get allReviewed(): boolean {
    return this.loaded && this.cards.length === 0;
  }

  async load(group?: string, page = 0): Promise<void> {
    this.group = group;
    this.page = page;
    try {
      const candidates = await this.api.getCandidates({
        group,
        page,
        pageSize: this.pageSize,
      });
      this.cards = candidates.map((candidate) => ({ candidate, phase: "pending" as const }));
      this.focus = 0;
      this.loaded = true;
      this.offlineError = null;
      this.emit({ kind: "loaded" });
    } catch (err) {
      // keep whatever is on screen; surface a banner instead
      this.offlineError = err instanceof Error ? err.message : String(err);
      this.emit({ kind: "error", message: this.offlineError });
      throw err;
    }
  }

  async refreshStats(): Promise<void> {
    try {
      this.stats = await this.api.getStats();
      this.offlineError = null;
      this.emit({ kind: "stats" });
    } catch (err) {
      this.offlineError = err instanceof Error ? err.message : String(err);
      this.emit({ kind: "error", message: this.offlineError });
    }
  }

  focusNext(): void {
    if (this.cards.length) {
      this.focus = Math.min(this.focus + 1, this.cards.length - 1);
      this.emit({ kind: "loaded" });
    }
  }

  focusPrev(): void {
    if (this.cards.length) {
      this.focus = Math.max(this.focus - 1, 0);
      this.emit({ kind: "loaded" });
    }
  }

  /** Apply a verdict to the focused card. Calls are chained so at most one
   * POST is in flight; repeated keypresses on a submitting card are no-ops. */
  decide(decision: Decision, reason?: string, newLabel?: string): Promise<void> {
    const run = this.inflight.then(() => this.submit(decision, reason, newLabel));
    this.inflight = run.catch(() => undefined);
    return run;
  }

  private async submit(decision: Decision, reason?: string, newLabel?: string): Promise<void> {
    const index = this.focus;
    const card = this.cards[index];
    if (!card || card.phase !== "pending") return;
    card.phase = "submitting";
    this.emit({ kind: "loaded" });

    let outcome: VerdictOutcome;
    try {
      outcome = await this.api.submitVerdict({
        sample_id: card.candidate.sample_id,
        decision,
        reason,
        new_label: newLabel,
      });
    } catch (err) {
      card.phase = "pending"; // roll the optimistic state back, drop nothing
      card.error = err instanceof Error ? err.message : String(err);
      this.emit({ kind: "error", message: card.error });
      return;
    }

    card.error = undefined;
    if (decision === "relabel") {
      card.phase = "pending";
      card.relabeledTo = outcome.relabeled_to;
    } else {
      const at = this.cards.indexOf(card);
      this.cards.splice(at, 1);
      if (decision === "reject" && outcome.replacement) {
        this.cards.splice(at, 0, { candidate: outcome.replacement, phase: "pending" });
        this.focus = Math.min(at + 1, Math.max(this.cards.length - 1, 0));
      } else {
        this.focus = Math.min(at, Math.max(this.cards.length - 1, 0));
      }
    }
    this.emit({ kind: "verdict" });
    await this.refreshStats();
  }
}
