/** Typed client for the curation service HTTP API. */

export interface Provenance {
  canvas_id: string;
  cutout_id: string;
  source_group: string;
  placement: [number, number] | null;
  scale: number | null;
  flip: boolean | null;
  attempt: number;
  seed: number | null;
}

export interface Candidate {
  sample_id: string;
  group: string;
  occlusion_ratio: number | null;
  status: string;
  provenance: Provenance;
  paths: { image: string; mask: string; overlay: string };
}

export interface GroupCounts {
  label: string;
  pending: number;
  accepted: number;
  rejected: number;
}

export interface Stats {
  synthesized: number;
  supplement: number;
  pending: number;
  accepted: number;
  rejected: number;
  rejection_rate: number;
  label_overrides: Record<string, string>;
}

export type Decision = "accept" | "reject" | "relabel";

export interface VerdictOutcome {
  status: string | null;
  replacement_id?: string | null;
  replacement?: Candidate;
  relabeled_to?: string;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number | null = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`, null);
    }
    if (!resp.ok) {
      let detail = `HTTP ${resp.status}`;
      try {
        const body = (await resp.json()) as { detail?: string };
        if (body.detail) detail = `${detail}: ${body.detail}`;
      } catch {
        // non-JSON error body; keep the bare status line
      }
      throw new ApiError(detail, resp.status);
    }
    return (await resp.json()) as T;
  }

  getGroups(): Promise<GroupCounts[]> {
    return this.request<GroupCounts[]>("/api/groups");
  }

  getCandidates(opts: { group?: string; page?: number; pageSize?: number } = {}): Promise<Candidate[]> {
    const params = new URLSearchParams();
    if (opts.group) params.set("group", opts.group);
    params.set("page", String(opts.page ?? 0));
    params.set("page_size", String(opts.pageSize ?? 12));
    return this.request<Candidate[]>(`/api/candidates?${params.toString()}`);
  }

  getStats(): Promise<Stats> {
    return this.request<Stats>("/api/stats");
  }

  submitVerdict(body: {
    sample_id: string;
    decision: Decision;
    reason?: string;
    new_label?: string;
  }): Promise<VerdictOutcome> {
    return this.request<VerdictOutcome>("/api/verdict", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  /** Absolute URL for an image endpoint path returned by the service. */
  resolve(path: string): string {
    return this.baseUrl + path;
  }
}
