/** Typed client for the reparam service. The service is stateless: every
 * /evaluate call carries the full slider state and returns the parameter
 * vector plus a ready-to-display indexed triangle mesh. */

export interface FreeVariable {
  name: string;
  lo: number;
  hi: number;
  base: number;
}

export interface GroupInfo {
  name: string;
  members: string[];
  absent_in: string[];
  default_on: boolean;
}

export interface SpaceInfo {
  category: string;
  d: number;
  d_free: number;
  variations: string[];
  free: FreeVariable[];
  groups: GroupInfo[];
}

export interface MeshRange {
  name: string;
  primitive_index: number;
  vertex_start: number;
  vertex_count: number;
  face_start: number;
  face_count: number;
}

export interface MeshPayload {
  vertices: number[][];
  faces: number[][];
  ranges: MeshRange[];
}

export interface EvalRequest {
  weights: Record<string, number>;
  offsets: number[];
  toggles: Record<string, boolean>;
}

export interface EvalResponse {
  x: number[];
  mesh: MeshPayload;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

/** Minimal transport surface, swappable in tests. */
export interface Transport {
  evaluate(body: EvalRequest): Promise<EvalResponse>;
}

export class Api implements Transport {
  constructor(private readonly baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.baseUrl + path);
    if (!res.ok) throw new ApiError(res.status, await res.text());
    return (await res.json()) as T;
  }

  async space(): Promise<SpaceInfo> {
    return this.get<SpaceInfo>('/space');
  }

  async baseMesh(): Promise<EvalResponse> {
    return this.get<EvalResponse>('/mesh/base');
  }

  async evaluate(body: EvalRequest): Promise<EvalResponse> {
    const res = await fetch(this.baseUrl + '/evaluate', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new ApiError(res.status, await res.text());
    return (await res.json()) as EvalResponse;
  }
}
