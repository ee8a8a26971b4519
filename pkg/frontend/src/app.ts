// Evaluation UI: fetch the next prediction, collect two 0-1 scores, submit,
// repeat. The app never mutates predictions; it only appends scores through
// the documented API. Post text is always rendered via textContent so markup
// in a post stays inert.

import { EvalTask, ScoreAck, ScoreSubmission, SummaryRow, Progress } from "./api.js";

/** The slice of ApiClient the app needs; tests substitute fakes. */
export interface EvalApi {
  nextTask(evaluatorId: string): Promise<EvalTask | null>;
  submitScore(submission: ScoreSubmission): Promise<ScoreAck>;
  summary(): Promise<SummaryRow[]>;
  progress(): Promise<Progress>;
}

/** Parse a score input; null when it is not a number in [0, 1]. */
export function parseScore(raw: string): number | null {
  if (raw.trim() === "") return null;
  const value = Number(raw);
  if (!Number.isFinite(value) || value < 0 || value > 1) return null;
  return value;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

interface ScoreControl {
  root: HTMLElement;
  input: HTMLInputElement;
  value(): number | null;
  reset(): void;
}

function scoreControl(label: string, idPrefix: string): ScoreControl {
  const root = el("div", "score-control");
  root.appendChild(el("label", "score-label", label));
  const buttons = el("div", "quick-buttons");
  const input = el("input") as HTMLInputElement;
  input.type = "number";
  input.id = `${idPrefix}-input`;
  input.min = "0";
  input.max = "1";
  input.step = "0.05";
  input.placeholder = "0..1";
  for (const quick of [0, 0.5, 1]) {
    const button = el("button", "quick", String(quick));
    button.type = "button";
    button.id = `${idPrefix}-quick-${String(quick).replace(".", "_")}`;
    button.onclick = () => {
      input.value = String(quick);
      for (const other of Array.from(buttons.children)) other.classList.remove("active");
      button.classList.add("active");
    };
    buttons.appendChild(button);
  }
  input.oninput = () => {
    for (const other of Array.from(buttons.children)) other.classList.remove("active");
  };
  root.appendChild(buttons);
  root.appendChild(input);
  return {
    root,
    input,
    value: () => parseScore(input.value),
    reset: () => {
      input.value = "";
      for (const other of Array.from(buttons.children)) other.classList.remove("active");
    },
  };
}

type View = "setup" | "task" | "done" | "summary";

export class EvalApp {
  private evaluatorId = "";
  private task: EvalTask | null = null;
  private view: View = "setup";
  private banner = "";
  private bannerKind: "error" | "info" = "info";
  private showRationale = true;
  private scored = 0;

  private root!: HTMLElement;
  private modeControl!: ScoreControl;
  private sentimentControl!: ScoreControl;

  constructor(private api: EvalApi) {}

  mount(root: HTMLElement): void {
    this.root = root;
    this.render();
  }

  // --- state transitions -------------------------------------------------

  async start(evaluatorId: string): Promise<void> {
    const trimmed = evaluatorId.trim();
    if (!trimmed) {
      this.setBanner("enter an evaluator name first", "error");
      return;
    }
    this.evaluatorId = trimmed;
    await this.fetchNext();
  }

  async fetchNext(): Promise<void> {
    try {
      const task = await this.api.nextTask(this.evaluatorId);
      this.banner = "";
      if (task === null) {
        this.task = null;
        this.view = "done";
      } else {
        this.task = task;
        this.view = "task";
      }
    } catch (err) {
      // keep whatever is on screen; the user can retry without losing input
      this.setBanner(`cannot reach the service: ${String(err)}. retry when it is back.`, "error");
      this.refreshBanner();
      return;
    }
    this.render();
  }

  async submit(): Promise<void> {
    if (!this.task) return;
    const mode = this.modeControl.value();
    const sentiment = this.sentimentControl.value();
    if (mode === null || sentiment === null) {
      // no re-render: whatever was typed stays on screen
      this.setBanner("both scores must be numbers between 0 and 1", "error");
      this.refreshBanner();
      return;
    }
    try {
      const ack = await this.api.submitScore({
        post_id: this.task.post_id,
        evaluator_id: this.evaluatorId,
        mode_score: mode,
        sentiment_score: sentiment,
      });
      this.scored += 1;
      this.setBanner(ack.superseded ? "updated an earlier score" : "", "info");
      await this.fetchNext();
    } catch (err) {
      // the task and the entered scores stay on screen, still editable
      this.setBanner(`submit failed: ${String(err)}. your scores are kept, try again.`, "error");
      this.refreshBanner();
    }
  }

  async openSummary(): Promise<void> {
    this.view = "summary";
    this.render();
    await this.renderSummary();
  }

  backToTasks(): void {
    if (this.evaluatorId) {
      void this.fetchNext();
    } else {
      this.view = "setup";
      this.render();
    }
  }

  private setBanner(message: string, kind: "error" | "info"): void {
    this.banner = message;
    this.bannerKind = kind;
  }

  /** Swap only the banner node, leaving the rest of the view (and any
   * half-entered scores) untouched. */
  private refreshBanner(): void {
    const existing = this.root.querySelector("#banner");
    if (existing) existing.remove();
    if (!this.banner) return;
    const node = el("div", `banner ${this.bannerKind}`, this.banner);
    node.id = "banner";
    const header = this.root.querySelector("header");
    if (header) {
      header.after(node);
    } else {
      this.root.prepend(node);
    }
  }

  // --- rendering ----------------------------------------------------------

  private render(): void {
    this.root.textContent = "";
    const header = el("header");
    header.appendChild(el("h1", undefined, "travel-mode label review"));
    const nav = el("nav");
    if (this.view !== "setup") {
      const tasksButton = el("button", "nav-button", "score");
      tasksButton.id = "nav-tasks";
      tasksButton.onclick = () => this.backToTasks();
      const summaryButton = el("button", "nav-button", "summary");
      summaryButton.id = "nav-summary";
      summaryButton.onclick = () => void this.openSummary();
      nav.appendChild(tasksButton);
      nav.appendChild(summaryButton);
    }
    header.appendChild(nav);
    this.root.appendChild(header);

    switch (this.view) {
      case "setup":
        this.renderSetup();
        break;
      case "task":
        this.renderTask();
        break;
      case "done":
        this.renderDone();
        break;
      case "summary":
        break; // filled asynchronously by renderSummary()
    }
    this.refreshBanner();
  }

  private renderSetup(): void {
    const card = el("section", "card");
    card.appendChild(el("p", undefined, "enter your evaluator name to begin"));
    const input = el("input") as HTMLInputElement;
    input.id = "evaluator-input";
    input.placeholder = "evaluator name";
    const button = el("button", "primary", "start");
    button.id = "start-button";
    button.onclick = () => void this.start(input.value);
    card.appendChild(input);
    card.appendChild(button);
    this.root.appendChild(card);
  }

  private renderTask(): void {
    const task = this.task;
    if (!task) return;
    const card = el("section", "card");
    card.appendChild(el("div", "meta", `signed in as ${this.evaluatorId} | ${task.remaining} left`));

    const post = el("blockquote", "post-text");
    post.id = "post-text";
    post.textContent = task.post_text; // escaped verbatim, never parsed
    card.appendChild(post);

    const prediction = el("div", "prediction");
    prediction.appendChild(el("span", "chip", `mode: ${task.predicted_mode}`));
    prediction.appendChild(el("span", "chip", `sentiment: ${task.predicted_sentiment}`));
    card.appendChild(prediction);

    const rationaleWrap = el("div", "rationale-wrap");
    const toggle = el("button", "link", this.showRationale ? "hide rationale" : "show rationale");
    toggle.id = "rationale-toggle";
    toggle.onclick = () => {
      this.showRationale = !this.showRationale;
      this.render();
    };
    rationaleWrap.appendChild(toggle);
    if (this.showRationale) {
      const rationale = el("p", "rationale");
      rationale.id = "rationale";
      rationale.textContent = task.rationale;
      rationaleWrap.appendChild(rationale);
    }
    card.appendChild(rationaleWrap);

    this.modeControl = scoreControl("travel mode correct?", "mode");
    this.sentimentControl = scoreControl("sentiment correct?", "sentiment");
    card.appendChild(this.modeControl.root);
    card.appendChild(this.sentimentControl.root);

    const submit = el("button", "primary", "submit and next");
    submit.id = "submit-button";
    submit.onclick = () => void this.submit();
    card.appendChild(submit);
    this.root.appendChild(card);
  }

  private renderDone(): void {
    const card = el("section", "card");
    card.id = "done-state";
    card.appendChild(el("h2", undefined, "all caught up"));
    card.appendChild(
      el("p", undefined, `you scored ${this.scored} task(s) this session. thank you!`),
    );
    const summaryButton = el("button", "primary", "view summary");
    summaryButton.onclick = () => void this.openSummary();
    card.appendChild(summaryButton);
    this.root.appendChild(card);
  }

  async renderSummary(): Promise<void> {
    const card = el("section", "card");
    card.id = "summary-view";
    try {
      const [rows, progress] = await Promise.all([this.api.summary(), this.api.progress()]);
      card.appendChild(
        el(
          "div",
          "meta",
          `posts: ${progress.total} | verified: ${progress.verified} | ` +
            `human scores: ${progress.human_scores} | evaluators: ${progress.evaluators}`,
        ),
      );
      card.appendChild(this.summaryTable(rows));
    } catch (err) {
      card.appendChild(el("p", "banner error", `cannot load summary: ${String(err)}`));
    }
    this.root.appendChild(card);
  }

  private summaryTable(rows: SummaryRow[]): HTMLElement {
    const table = el("table", "summary-table");
    table.id = "summary-table";
    const head = el("tr");
    for (const title of ["group", "source", "travel mode", "sentiment", "n"]) {
      head.appendChild(el("th", undefined, title));
    }
    table.appendChild(head);
    if (rows.length === 0) {
      const empty = el("tr");
      const cell = el("td", "empty", "no scores yet");
      cell.colSpan = 5;
      empty.appendChild(cell);
      table.appendChild(empty);
      return table;
    }
    for (const row of rows) {
      const tr = el("tr");
      tr.appendChild(el("td", undefined, row.group_key));
      tr.appendChild(el("td", undefined, row.source));
      tr.appendChild(el("td", "num", row.avg_mode_score.toFixed(2)));
      tr.appendChild(el("td", "num", row.avg_sentiment_score.toFixed(2)));
      tr.appendChild(el("td", "num", String(row.n_items)));
      table.appendChild(tr);
    }
    return table;
  }
}
