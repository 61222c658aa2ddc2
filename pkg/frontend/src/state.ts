/** Review session state and its pure transitions.
 *
 * Everything here is side-effect free so the interaction rules (slice
 * clamping, axis switching, draft handling, completion badges) are unit
 * testable without a DOM. Drafts live per case and survive navigation; a
 * score becomes "submitted" only after the server acknowledges it.
 */

export interface ViewerPose {
  axis: number;
  sliceIndex: number;
  window: number;
  level: number;
  overlaysOff: Set<string>;
}

export interface CaseSession {
  pose: ViewerPose;
  drafts: Record<string, number>;
  submitted: Record<string, number>;
}

export interface ReviewState {
  raterId: string;
  currentCase: string | null;
  dims: [number, number, number] | null;
  sessions: Record<string, CaseSession>;
}

export const LIKERT_CAPTIONS: Record<number, string> = {
  // 5 and 1 are the protocol anchors; intermediate wording is this UI's own
  5: "use as-is, no modifications needed",
  4: "clinically acceptable with minor modifications",
  3: "usable after moderate modifications",
  2: "major modifications needed",
  1: "unusable",
};

export function initialState(raterId: string): ReviewState {
  return { raterId, currentCase: null, dims: null, sessions: {} };
}

export function defaultPose(window: number, level: number, axialAxis: number): ViewerPose {
  return { axis: axialAxis, sliceIndex: 0, window, level, overlaysOff: new Set() };
}

export function sessionFor(state: ReviewState, caseId: string,
                           makePose: () => ViewerPose): CaseSession {
  let session = state.sessions[caseId];
  if (!session) {
    session = { pose: makePose(), drafts: {}, submitted: {} };
    state.sessions[caseId] = session;
  }
  return session;
}

export function clampSlice(dims: [number, number, number], axis: number,
                           index: number): number {
  const n = dims[axis] ?? 1;
  return Math.max(0, Math.min(n - 1, index));
}

/** Scroll by delta slices, clamped to the volume bounds. */
export function scrollSlice(pose: ViewerPose, dims: [number, number, number],
                            delta: number): ViewerPose {
  return { ...pose, sliceIndex: clampSlice(dims, pose.axis, pose.sliceIndex + delta) };
}

/** Switch viewing axis; the slice index is remapped to the nearest valid
 *  slice of the new axis (clamp). */
export function switchAxis(pose: ViewerPose, dims: [number, number, number],
                           axis: number): ViewerPose {
  return { ...pose, axis, sliceIndex: clampSlice(dims, axis, pose.sliceIndex) };
}

export function toggleOverlay(pose: ViewerPose, organ: string): ViewerPose {
  const off = new Set(pose.overlaysOff);
  if (off.has(organ)) {
    off.delete(organ);
  } else {
    off.add(organ);
  }
  return { ...pose, overlaysOff: off };
}

export function isValidScore(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value) && value >= 1 && value <= 5;
}

export function setDraft(session: CaseSession, organ: string, score: number): void {
  if (!isValidScore(score)) {
    throw new Error(`score must be an integer 1..5, got ${score}`);
  }
  session.drafts[organ] = score;
}

export function acknowledge(session: CaseSession, organ: string, score: number): void {
  session.submitted[organ] = score;
  delete session.drafts[organ];
}

/** Organs still awaiting submission (drafted but not acknowledged). */
export function pendingOrgans(session: CaseSession): string[] {
  return Object.keys(session.drafts).filter((o) => !(o in session.submitted));
}

export interface Badge {
  scored: number;
  present: number;
  percent: number;
}

/** Completion badge for one case: scored organs over present organs. */
export function completionBadge(presentOrgans: string[],
                                scoredOrgans: string[]): Badge {
  const present = new Set(presentOrgans);
  const scored = new Set(scoredOrgans.filter((o) => present.has(o)));
  const percent = present.size === 0 ? 0
    : Math.round((100 * scored.size) / present.size);
  return { scored: scored.size, present: present.size, percent };
}
