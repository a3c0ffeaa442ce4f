/** Wire types mirroring the query service's JSON API (see ../API.md). */

export interface Interval {
  lo: number;
  hi: number;
}

export interface AggregateSpec {
  func: 'count' | 'sum' | 'mean' | 'min' | 'max';
  attribute: number | null;
}

export interface QueryRequest {
  ix: Interval;
  iy: Interval;
  aggs: AggregateSpec[];
  eps_max: number;
  gamma: number;
  include_points?: boolean;
  max_points?: number;
}

export interface AggregateResult {
  func: string;
  attribute: number | null;
  value?: number;
  ci_lo?: number;
  ci_hi?: number;
  eps_est?: number | null;
  exact?: boolean;
  error?: string;
}

export interface QueryStats {
  io_reads: number;
  sampling_iterations: number;
  tiles_full: number;
  tiles_partial: number;
  tiles_split: number;
  elapsed_ms: number;
}

export interface ScatterPoints {
  x: number[];
  y: number[];
  total: number;
}

export interface QueryResponse {
  aggregates: AggregateResult[];
  stats: QueryStats;
  init_stats?: Record<string, number>;
  points?: ScatterPoints;
}

export type TileStatus = 'exact' | 'approximate' | 'not_available';

export interface TileInfo {
  x_lo: number;
  x_hi: number;
  y_lo: number;
  y_hi: number;
  depth: number;
  leaf: boolean;
  n_objects: number;
  sampled: number;
  status: Record<string, TileStatus>;
}

export interface IndexStats {
  initialized: boolean;
  bounds?: { x_lo: number; x_hi: number; y_lo: number; y_hi: number };
  n_tiles?: number;
  n_leaves?: number;
  n_objects?: number;
  tiles_split?: number;
  tiles?: TileInfo[];
}

export interface DatasetBody {
  file_path: string;
  attributes: { name: string; kind?: string }[];
  axis_x: number;
  axis_y: number;
  delimiter?: string;
  has_header?: boolean;
}

export interface SessionBody {
  dataset_id: string;
  engine?: Record<string, number>;
  init?: Record<string, unknown>;
}
