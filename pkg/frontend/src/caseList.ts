/** Case browser: one row per case with a completion badge
 *  (scored organs / present organs for the active rater). */

import { CaseEntry } from "./api";
import { completionBadge } from "./state";

export class CaseList {
  readonly root: HTMLElement;

  constructor(private readonly raterId: string,
              private readonly onOpen: (caseId: string) => void) {
    this.root = document.createElement("div");
    this.root.className = "case-list";
  }

  render(cases: CaseEntry[], presentByCase: Record<string, string[]>): void {
    this.root.replaceChildren();
    if (cases.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty-state";
      empty.textContent = "No cases to review.";
      this.root.appendChild(empty);
      return;
    }
    const table = document.createElement("table");
    const head = document.createElement("tr");
    for (const label of ["case", "patient", "age", "sex", "progress", ""]) {
      const th = document.createElement("th");
      th.textContent = label;
      head.appendChild(th);
    }
    table.appendChild(head);
    for (const entry of cases) {
      const present = presentByCase[entry.case_id] ?? [];
      const scored = entry.scored_organs[this.raterId] ?? [];
      const badge = completionBadge(present, scored);
      const row = document.createElement("tr");
      row.dataset.caseId = entry.case_id;
      const cells = [
        entry.case_id,
        entry.patient_id,
        entry.age_years.toFixed(1),
        entry.sex,
        `${badge.scored}/${badge.present} (${badge.percent}%)`,
      ];
      for (const text of cells) {
        const td = document.createElement("td");
        td.textContent = text;
        row.appendChild(td);
      }
      const td = document.createElement("td");
      const open = document.createElement("button");
      open.textContent = "review";
      open.addEventListener("click", () => this.onOpen(entry.case_id));
      td.appendChild(open);
      row.appendChild(td);
      table.appendChild(row);
    }
    this.root.appendChild(table);
  }

  renderError(message: string, retry: () => void): void {
    this.root.replaceChildren();
    const banner = document.createElement("div");
    banner.className = "error-banner";
    banner.textContent = `Service unreachable: ${message} `;
    const button = document.createElement("button");
    button.textContent = "retry";
    button.addEventListener("click", retry);
    banner.appendChild(button);
    this.root.appendChild(banner);
  }
}
