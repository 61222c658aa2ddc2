// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from "vitest";

import { OrganInfo, ReviewApi } from "../src/api";
import { CaseList } from "../src/caseList";
import { ScoreForm } from "../src/scoreForm";
import { defaultPose, initialState, sessionFor } from "../src/state";
import { SliceViewer } from "../src/viewer";

const ORGANS: OrganInfo[] = [
  { name: "spleen", label_code: 1, organ_type: "type1", color: "#e6194b",
    present: true, voxel_count: 100 },
  { name: "liver", label_code: 6, organ_type: "type1", color: "#46f0f0",
    present: true, voxel_count: 200 },
  { name: "kidney_left", label_code: 2, organ_type: "type1", color: "#3cb44b",
    present: false, voxel_count: 0 },
];

const DIMS: [number, number, number] = [24, 24, 16];

function makeViewer(api = new ReviewApi("")) {
  const poses: unknown[] = [];
  const viewer = new SliceViewer(api, "case_a", DIMS, ORGANS,
                                 ["R", "A", "S"], defaultPose(400, 40, 2),
                                 { onPoseChange: (p) => poses.push(p) });
  document.body.replaceChildren(viewer.root);
  return { viewer, poses };
}

describe("SliceViewer", () => {
  it("renders one overlay layer per present organ", () => {
    makeViewer();
    const layers = document.querySelectorAll(".layer-overlay");
    expect(layers.length).toBe(2); // absent kidney gets no layer
  });

  it("wheel scrolling clamps at the volume bounds", () => {
    const { viewer } = makeViewer();
    const stack = document.querySelector(".layer-stack")!;
    for (let step = 0; step < 30; step++) {
      stack.dispatchEvent(new WheelEvent("wheel", { deltaY: 120 }));
    }
    expect(viewer.currentPose().sliceIndex).toBe(15);
    for (let step = 0; step < 40; step++) {
      stack.dispatchEvent(new WheelEvent("wheel", { deltaY: -120 }));
    }
    expect(viewer.currentPose().sliceIndex).toBe(0);
  });

  it("toggling an organ hides its layer without touching the base image", () => {
    const { viewer } = makeViewer();
    const base = document.querySelector<HTMLImageElement>(".layer-base")!;
    const baseSrc = base.src;
    const spleenLayer = document.querySelector<HTMLImageElement>(
      '.layer-overlay[data-organ="spleen"]')!;
    expect(spleenLayer.style.display).not.toBe("none");
    viewer.setOverlay("spleen", false);
    expect(spleenLayer.style.display).toBe("none");
    expect(base.src).toBe(baseSrc);
    viewer.setOverlay("spleen", true);
    expect(spleenLayer.style.display).not.toBe("none");
  });

  it("axis switch remaps the slice index", () => {
    const { viewer } = makeViewer();
    const stack = document.querySelector(".layer-stack")!;
    for (let step = 0; step < 14; step++) {
      stack.dispatchEvent(new WheelEvent("wheel", { deltaY: 120 }));
    }
    expect(viewer.currentPose().sliceIndex).toBe(14);
    const axis0 = document.querySelector<HTMLButtonElement>('button[data-axis="0"]')!;
    axis0.click();
    expect(viewer.currentPose().axis).toBe(0);
    expect(viewer.currentPose().sliceIndex).toBe(14); // still valid, kept
  });

  it("slice urls carry window/level and overlay mode", () => {
    const api = new ReviewApi("http://example");
    expect(api.sliceUrl("c", 2, 5, { window: 400, level: 40, mode: "base" }))
      .toBe("http://example/api/cases/c/slices/2/5?window=400&level=40&mode=base");
    expect(api.sliceUrl("c", 0, 1, { overlays: ["spleen"], mode: "overlay" }))
      .toBe("http://example/api/cases/c/slices/0/1?overlays=spleen&mode=overlay");
  });
});

describe("ScoreForm", () => {
  beforeEach(() => {
    vi.restoreAllMocks();
  });

  function makeForm(api: ReviewApi) {
    const state = initialState("R1");
    const session = sessionFor(state, "case_a", () => defaultPose(400, 40, 2));
    const submitted: string[] = [];
    const form = new ScoreForm(api, "case_a", "R1", ORGANS, session, {
      onSubmitted: (organ) => submitted.push(organ),
      onToggleOverlay: () => {},
    });
    document.body.replaceChildren(form.root);
    return { form, session, submitted };
  }

  it("renders selectors only for present organs", () => {
    makeForm(new ReviewApi(""));
    const selects = document.querySelectorAll("select");
    expect(selects.length).toBe(2);
    expect(document.querySelector('select[data-organ="kidney_left"]')).toBeNull();
  });

  it("submits drafts and records acknowledgments", async () => {
    const api = new ReviewApi("");
    vi.spyOn(api, "submitScore").mockResolvedValue({
      status: "ok",
      record: { case_id: "case_a", organ: "x", rater_id: "R1", score: 4 },
    });
    const { form, session, submitted } = makeForm(api);
    const select = document.querySelector<HTMLSelectElement>(
      'select[data-organ="liver"]')!;
    select.value = "4";
    select.dispatchEvent(new Event("change"));
    expect(session.drafts.liver).toBe(4);
    await form.submitAll();
    expect(session.submitted.liver).toBe(4);
    expect(session.drafts.liver).toBeUndefined();
    expect(submitted).toEqual(["liver"]);
  });

  it("keeps unacknowledged scores as drafts on network failure", async () => {
    const api = new ReviewApi("");
    vi.spyOn(api, "submitScore").mockRejectedValue(new TypeError("offline"));
    const { form, session } = makeForm(api);
    const select = document.querySelector<HTMLSelectElement>(
      'select[data-organ="spleen"]')!;
    select.value = "5";
    select.dispatchEvent(new Event("change"));
    await form.submitAll();
    expect(session.drafts.spleen).toBe(5);       // nothing lost
    expect(session.submitted.spleen).toBeUndefined();
    const error = document.querySelector<HTMLSpanElement>(
      '.score-row[data-organ="spleen"] .score-error')!;
    expect(error.textContent).toContain("network error");
  });
});

describe("CaseList", () => {
  it("renders rows with completion badges", () => {
    const list = new CaseList("R1", () => {});
    document.body.replaceChildren(list.root);
    list.render(
      [{ case_id: "case_a", patient_id: "p0", dataset: "synthetic",
         age_years: 3, sex: "male", n_organs_present: 2,
         scored_organs: { R1: ["spleen"] } },
       { case_id: "case_b", patient_id: "p1", dataset: "synthetic",
         age_years: 4, sex: "female", n_organs_present: 2,
         scored_organs: {} }],
      { case_a: ["spleen", "liver"], case_b: ["spleen", "liver"] },
    );
    const rows = document.querySelectorAll("tr[data-case-id]");
    expect(rows.length).toBe(2);
    expect(rows[0]!.textContent).toContain("1/2 (50%)");
    expect(rows[1]!.textContent).toContain("0/2 (0%)");
  });

  it("shows an empty state and a retry banner", () => {
    const list = new CaseList("R1", () => {});
    document.body.replaceChildren(list.root);
    list.render([], {});
    expect(document.querySelector(".empty-state")).not.toBeNull();
    let retried = false;
    list.renderError("connection refused", () => { retried = true; });
    document.querySelector<HTMLButtonElement>(".error-banner button")!.click();
    expect(retried).toBe(true);
  });
});
