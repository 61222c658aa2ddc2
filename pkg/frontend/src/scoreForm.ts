/** Likert score form: one 1-5 selector per organ present in the case.
 *  Absent organs get no selector. Submission POSTs each drafted score and
 *  only server-acknowledged scores leave the draft set, so a network
 *  failure mid-submit keeps the rest as drafts. */

import { ApiError, OrganInfo, ReviewApi } from "./api";
import { CaseSession, LIKERT_CAPTIONS, acknowledge, pendingOrgans, setDraft } from "./state";

export interface ScoreFormCallbacks {
  onSubmitted(organ: string, score: number): void;
  onToggleOverlay(organ: string, visible: boolean): void;
}

export class ScoreForm {
  readonly root: HTMLElement;
  private readonly errors = new Map<string, HTMLSpanElement>();
  private readonly banner: HTMLDivElement;

  constructor(
    private readonly api: ReviewApi,
    private readonly caseId: string,
    private readonly raterId: string,
    organs: OrganInfo[],
    private readonly session: CaseSession,
    private readonly callbacks: ScoreFormCallbacks,
  ) {
    this.root = document.createElement("form");
    this.root.className = "score-form";
    this.root.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitAll();
    });

    const caption = document.createElement("p");
    caption.className = "score-caption";
    caption.textContent =
      "Rate each contour from 5 (use as-is) to 1 (unusable). " +
      "Intermediate captions are this tool's wording, not protocol text.";
    this.root.appendChild(caption);

    for (const organ of organs) {
      if (!organ.present) continue;  // absent organs are not scorable
      this.root.appendChild(this.organRow(organ));
    }

    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = "submit scores";
    this.root.appendChild(submit);

    this.banner = document.createElement("div");
    this.banner.className = "score-banner";
    this.root.appendChild(this.banner);
    this.refresh();
  }

  private organRow(organ: OrganInfo): HTMLElement {
    const row = document.createElement("div");
    row.className = "score-row";
    row.dataset.organ = organ.name;

    const toggle = document.createElement("input");
    toggle.type = "checkbox";
    toggle.checked = true;
    toggle.title = "show contour";
    toggle.addEventListener("change", () =>
      this.callbacks.onToggleOverlay(organ.name, toggle.checked));

    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.backgroundColor = organ.color;

    const name = document.createElement("span");
    name.className = "organ-name";
    name.textContent = organ.name;

    const select = document.createElement("select");
    select.dataset.organ = organ.name;
    const blank = document.createElement("option");
    blank.value = "";
    blank.textContent = "-";
    select.appendChild(blank);
    for (let score = 5; score >= 1; score--) {
      const option = document.createElement("option");
      option.value = String(score);
      option.textContent = `${score} - ${LIKERT_CAPTIONS[score]}`;
      select.appendChild(option);
    }
    const draft = this.session.drafts[organ.name] ?? this.session.submitted[organ.name];
    if (draft !== undefined) select.value = String(draft);
    select.addEventListener("change", () => {
      if (select.value === "") return;
      setDraft(this.session, organ.name, Number(select.value));
      this.refresh();
    });

    const error = document.createElement("span");
    error.className = "score-error";
    this.errors.set(organ.name, error);

    row.append(toggle, swatch, name, select, error);
    return row;
  }

  /** POST every pending draft; acknowledged organs move out of the draft
   *  set, rejected ones surface their error inline and stay drafted. */
  async submitAll(): Promise<void> {
    const pending = pendingOrgans(this.session);
    for (const organ of Object.keys(this.session.drafts)) {
      if (!pending.includes(organ)
          && this.session.drafts[organ] !== this.session.submitted[organ]) {
        pending.push(organ);  // re-submission with a changed score
      }
    }
    let accepted = 0;
    for (const organ of pending) {
      const score = this.session.drafts[organ];
      if (score === undefined) continue;
      try {
        await this.api.submitScore(this.caseId, this.raterId, organ, score);
        acknowledge(this.session, organ, score);
        this.setError(organ, "");
        this.callbacks.onSubmitted(organ, score);
        accepted += 1;
      } catch (err) {
        const message = err instanceof ApiError ? err.message : "network error; kept as draft";
        this.setError(organ, message);
      }
    }
    this.refresh(accepted);
  }

  private setError(organ: string, message: string): void {
    const slot = this.errors.get(organ);
    if (slot) slot.textContent = message;
  }

  private refresh(justAccepted = 0): void {
    const drafts = Object.keys(this.session.drafts).length;
    const submitted = Object.keys(this.session.submitted).length;
    this.banner.textContent =
      `${submitted} scored, ${drafts} drafted` +
      (justAccepted ? ` (${justAccepted} accepted just now)` : "");
  }
}
