/**
 * Typed client for the annotation service HTTP API.
 *
 * Every call returns the parsed payload together with the raw response
 * text. The text is what gets hashed, exported, and compared across
 * re-runs, so no displayed value ever passes through a client-side
 * re-serialization. Failures keep the exact error body for verbatim
 * display.
 */

export type Target = "upper" | "lower";
export type VesselMethod = "mmcq" | "niblack" | "vote";
export type Alignment = "choroid_aligned" | "image_aligned";

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
}

export interface TraceConfig {
  n_curves?: number;
  keep_fraction?: number;
  delta_x?: number;
  noise_sigma?: number;
  kde_truncation_radius?: number;
  sigma_f?: number;
  sigma_l?: number;
}

export interface TraceRequest {
  target: Target;
  endpoints: [number, number][];
  guides?: [number, number][];
  seed?: number;
  config?: TraceConfig;
}

export interface TracePayload {
  trace: {
    kind: string;
    c0: number;
    rows: number[];
    band_lower: number[];
    band_upper: number[];
  };
  observations: [number, number][];
  iterations: number;
  optimised_cov: { kind: string; sigma_f: number; sigma_l: number };
  optimised_noise: number;
}

export interface VesselConfig {
  clusters?: number;
  keep_clusters?: number;
  cc_microns?: number;
  window?: number;
  offset?: number;
  votes_required?: number;
}

export interface VesselsRequest {
  method?: VesselMethod;
  config?: VesselConfig;
}

export interface VesselsSummary {
  mask: string;
  vessel_pixels: number;
  region_pixels: number;
  vessel_area_mm2: number;
  region_area_mm2: number;
  cvi_preview: number | null;
}

export interface MeasureRequest {
  fovea: [number, number];
  roi_microns?: number;
  alignment?: Alignment;
  tangent_offset?: number;
}

export interface RoiReport {
  sfct_microns: number;
  avg_thickness_microns: number;
  area_mm2: number;
  roi_polygon: [number, number][];
  vessel_area_mm2?: number;
  cvi?: number;
}

export interface ApiResult<T> {
  payload: T;
  text: string;
}

export type FetchLike = typeof fetch;

/** Non-2xx response; keeps the exact body text so the UI can show it verbatim. */
export class ApiFailure extends Error {
  constructor(
    public readonly status: number,
    public readonly bodyText: string,
  ) {
    super(`HTTP ${status}: ${bodyText}`);
    this.name = "ApiFailure";
  }

  /** Parsed body when the server sent JSON, null otherwise. */
  get body(): { error?: string; [key: string]: unknown } | null {
    try {
      return JSON.parse(this.bodyText);
    } catch {
      return null;
    }
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  sessionUrl(id: string): string {
    return `${this.baseUrl}/api/session/${id}`;
  }

  imageUrl(id: string): string {
    return `${this.sessionUrl(id)}/image`;
  }

  edgemapUrl(id: string, target: Target): string {
    return `${this.sessionUrl(id)}/edgemap?target=${target}`;
  }

  maskUrl(id: string): string {
    return `${this.sessionUrl(id)}/vessels/mask`;
  }

  private async request(url: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(url, init);
    if (!response.ok) {
      throw new ApiFailure(response.status, await response.text());
    }
    return response;
  }

  private async json<T>(url: string, init?: RequestInit): Promise<ApiResult<T>> {
    const response = await this.request(url, init);
    const text = await response.text();
    return { payload: JSON.parse(text) as T, text };
  }

  private post<T>(url: string, body: unknown): Promise<ApiResult<T>> {
    return this.json<T>(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async createSession(
    image: Blob,
    axialScale: number,
    lateralScale: number,
    eye: string = "unknown",
  ): Promise<SessionInfo> {
    const form = new FormData();
    form.append("image", image, "scan.png");
    form.append("axial_scale", String(axialScale));
    form.append("lateral_scale", String(lateralScale));
    form.append("eye", eye);
    const { payload } = await this.json<SessionInfo>(`${this.baseUrl}/api/session`, {
      method: "POST",
      body: form,
    });
    return payload;
  }

  trace(id: string, req: TraceRequest): Promise<ApiResult<TracePayload>> {
    return this.post<TracePayload>(`${this.sessionUrl(id)}/trace`, req);
  }

  vessels(id: string, req: VesselsRequest = {}): Promise<ApiResult<VesselsSummary>> {
    return this.post<VesselsSummary>(`${this.sessionUrl(id)}/vessels`, req);
  }

  measure(id: string, req: MeasureRequest): Promise<ApiResult<RoiReport>> {
    return this.post<RoiReport>(`${this.sessionUrl(id)}/measure`, req);
  }

  async maskBytes(id: string): Promise<ArrayBuffer> {
    const response = await this.request(this.maskUrl(id));
    return response.arrayBuffer();
  }

  async deleteSession(id: string): Promise<void> {
    await this.request(this.sessionUrl(id), { method: "DELETE" });
  }
}
