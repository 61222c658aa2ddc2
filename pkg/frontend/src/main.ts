/** Application shell: rater sign-in, case browser, and per-case review
 *  screen (viewer + score form). One rater per browser session; the server
 *  merges raters. */

import { CaseEntry, OrganInfo, ReviewApi } from "./api";
import { CaseList } from "./caseList";
import { ScoreForm } from "./scoreForm";
import {
  ReviewState, defaultPose, initialState, sessionFor,
} from "./state";
import { SliceViewer } from "./viewer";
import "./styles.css";

export class ReviewApp {
  private state: ReviewState | null = null;
  private caseList: CaseList | null = null;
  private cases: CaseEntry[] = [];
  private presentByCase: Record<string, string[]> = {};

  constructor(private readonly api: ReviewApi, private readonly root: HTMLElement) {}

  start(): void {
    this.renderSignIn();
  }

  private renderSignIn(): void {
    this.root.replaceChildren();
    const form = document.createElement("form");
    form.className = "signin";
    const label = document.createElement("label");
    label.textContent = "rater id ";
    const input = document.createElement("input");
    input.name = "rater";
    input.placeholder = "e.g. R1";
    label.appendChild(input);
    const go = document.createElement("button");
    go.type = "submit";
    go.textContent = "start review";
    form.append(label, go);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const raterId = input.value.trim();
      if (!raterId) return;
      this.state = initialState(raterId);
      void this.showCaseList();
    });
    this.root.appendChild(form);
  }

  async showCaseList(): Promise<void> {
    if (!this.state) return;
    this.root.replaceChildren();
    const heading = document.createElement("h1");
    heading.textContent = `Contour review — rater ${this.state.raterId}`;
    this.root.appendChild(heading);
    this.caseList = new CaseList(this.state.raterId, (caseId) => {
      void this.openCase(caseId);
    });
    this.root.appendChild(this.caseList.root);
    await this.refreshCases();
  }

  private async refreshCases(): Promise<void> {
    if (!this.caseList) return;
    try {
      const listing = await this.api.listCases();
      this.cases = listing.cases;
      for (const entry of this.cases) {
        if (!(entry.case_id in this.presentByCase)) {
          const organs = await this.api.caseOrgans(entry.case_id);
          this.presentByCase[entry.case_id] = organs.organs
            .filter((o) => o.present)
            .map((o) => o.name);
        }
      }
      this.caseList.render(this.cases, this.presentByCase);
    } catch (err) {
      this.caseList.renderError(String(err), () => void this.refreshCases());
    }
  }

  async openCase(caseId: string): Promise<void> {
    const state = this.state;
    if (!state) return;
    const [meta, organsDoc] = await Promise.all([
      this.api.caseMeta(caseId),
      this.api.caseOrgans(caseId),
    ]);
    const organs: OrganInfo[] = organsDoc.organs;
    state.currentCase = caseId;
    state.dims = meta.dims;
    const session = sessionFor(state, caseId, () =>
      defaultPose(meta.window_default, meta.level_default, meta.axial_axis));

    this.root.replaceChildren();
    const heading = document.createElement("h1");
    heading.textContent = `${caseId} — ${meta.patient_id}`;
    const back = document.createElement("button");
    back.textContent = "back to cases";
    back.className = "back-button";
    back.addEventListener("click", () => void this.showCaseList());
    this.root.append(back, heading);

    const grid = document.createElement("div");
    grid.className = "review-grid";
    const viewer = new SliceViewer(
      this.api, caseId, meta.dims, organs, meta.axis_codes, session.pose, {
        onPoseChange: (pose) => {
          session.pose = pose;  // drafts and pose survive navigation
        },
      });
    const form = new ScoreForm(this.api, caseId, state.raterId, organs, session, {
      onSubmitted: () => void this.updateBadgeCache(caseId),
      onToggleOverlay: (organ, visible) => viewer.setOverlay(organ, visible),
    });
    grid.append(viewer.root, form.root);
    this.root.appendChild(grid);
  }

  private async updateBadgeCache(caseId: string): Promise<void> {
    try {
      const listing = await this.api.listCases();
      this.cases = listing.cases;
    } catch {
      // badge refresh is best-effort; scores are already persisted
    }
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = new ReviewApp(new ReviewApi(""), document.getElementById("app")!);
  app.start();
}
