/** Wire types for the /v1 service API. Field names match the JSON exactly. */

export interface ClusterRow {
  id: number;
  count: number;
  /** null until an expert assigns one */
  label: string | null;
  /** 1024 dB values, or null for an empty cluster */
  average: number[] | null;
  centroid2d: [number, number];
}

export interface ClustersPayload {
  k: number;
  /** bumps on every label edit; used to detect concurrent editors */
  revision: number;
  clusters: ClusterRow[];
}

export interface ClassifyResult {
  cluster_id: number;
  /** "unmapped" when the cluster has no label yet */
  label: string;
  confidence: number;
  embedding: number[];
}

export interface ModelInfo {
  arch: string;
  k: number;
  params: number;
  gflops: number;
  trained_at: string | null;
  seed: number | null;
}

export interface LabelPutResult {
  revision: number;
}
