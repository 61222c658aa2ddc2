/** Typed client for the review service API. All endpoints are read-only
 *  except score submission. */

export interface CaseEntry {
  case_id: string;
  patient_id: string;
  dataset: string;
  age_years: number;
  sex: string;
  n_organs_present: number;
  scored_organs: Record<string, string[]>;
}

export interface CaseMeta {
  case_id: string;
  patient_id: string;
  dataset: string;
  age_years: number;
  sex: string;
  tumor_type: string;
  iv_contrast: string;
  nephrectomy_side: string;
  dims: [number, number, number];
  spacing: [number, number, number];
  axis_codes: [string, string, string];
  axial_axis: number;
  window_default: number;
  level_default: number;
}

export interface OrganInfo {
  name: string;
  label_code: number;
  organ_type: string;
  color: string;
  present: boolean;
  voxel_count: number;
}

export interface LikertOrganSummary {
  organ: string;
  combined_mean: number;
  usability: string;
  n_cases: number;
  n_scores: number;
  disagreement: boolean;
  raters: { rater_id: string; n: number; mean: number; sd: number }[];
}

export interface ScoreAck {
  status: string;
  record: { case_id: string; organ: string; rater_id: string; score: number };
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText);
  }
  return body as T;
}

export class ReviewApi {
  constructor(readonly base: string = "") {}

  listCases(): Promise<{ cases: CaseEntry[] }> {
    return getJson(`${this.base}/api/cases`);
  }

  caseMeta(caseId: string): Promise<CaseMeta> {
    return getJson(`${this.base}/api/cases/${encodeURIComponent(caseId)}/meta`);
  }

  caseOrgans(caseId: string): Promise<{ organs: OrganInfo[] }> {
    return getJson(`${this.base}/api/cases/${encodeURIComponent(caseId)}/organs`);
  }

  likertSummary(): Promise<{ organs: LikertOrganSummary[] }> {
    return getJson(`${this.base}/api/summary/likert`);
  }

  /** URL of one slice rendering; mode "base" is the windowed CT alone and
   *  mode "overlay" draws only the requested organ contours (RGBA). */
  sliceUrl(
    caseId: string,
    axis: number,
    index: number,
    opts: { window?: number; level?: number; overlays?: string[]; mode?: string } = {},
  ): string {
    const params = new URLSearchParams();
    if (opts.window !== undefined) params.set("window", String(opts.window));
    if (opts.level !== undefined) params.set("level", String(opts.level));
    if (opts.overlays !== undefined) params.set("overlays", opts.overlays.join(","));
    if (opts.mode !== undefined) params.set("mode", opts.mode);
    const query = params.toString();
    return (
      `${this.base}/api/cases/${encodeURIComponent(caseId)}/slices/${axis}/${index}` +
      (query ? `?${query}` : "")
    );
  }

  async submitScore(
    caseId: string,
    raterId: string,
    organ: string,
    score: number,
    comment = "",
  ): Promise<ScoreAck> {
    const resp = await fetch(`${this.base}/api/cases/${encodeURIComponent(caseId)}/scores`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ rater_id: raterId, organ, score, comment }),
    });
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText);
    }
    return body as ScoreAck;
  }
}
