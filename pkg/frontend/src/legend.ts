/** Vegetation-index display scale. The boundaries mirror the server's
 * bucketing exactly: bare < 0.1 <= sparse < 0.3 <= moderate < 0.6 <= dense,
 * left-closed, with masked for clouded or undefined cells. */

export type NdviBucket = "bare" | "sparse" | "moderate" | "dense" | "masked";

export const BUCKET_COLORS: Record<NdviBucket, string> = {
  bare: "#c9b28a",
  sparse: "#d9e8a8",
  moderate: "#7fc97f",
  dense: "#1b7837",
  masked: "#b9c2cc",
};

export const BUCKET_LABELS: [NdviBucket, string][] = [
  ["bare", "< 0.1"],
  ["sparse", "0.1 – 0.3"],
  ["moderate", "0.3 – 0.6"],
  ["dense", "≥ 0.6"],
  ["masked", "masked"],
];

export function ndviBucket(value: number | null): NdviBucket {
  if (value === null || Number.isNaN(value)) return "masked";
  if (value < 0.1) return "bare";
  if (value < 0.3) return "sparse";
  if (value < 0.6) return "moderate";
  return "dense";
}

export function ndviColor(value: number | null): string {
  return BUCKET_COLORS[ndviBucket(value)];
}
