/** Equirectangular projection of lat/lon onto an SVG viewport. */

export interface Viewport {
  width: number;
  height: number;
  minLat: number;
  maxLat: number;
  minLon: number;
  maxLon: number;
  cosRef: number;
}

export function fitViewport(
  points: [number, number][],
  width = 800,
  height = 600,
  padFraction = 0.06,
): Viewport {
  let minLat = Infinity;
  let maxLat = -Infinity;
  let minLon = Infinity;
  let maxLon = -Infinity;
  for (const [lat, lon] of points) {
    minLat = Math.min(minLat, lat);
    maxLat = Math.max(maxLat, lat);
    minLon = Math.min(minLon, lon);
    maxLon = Math.max(maxLon, lon);
  }
  const padLat = (maxLat - minLat || 0.001) * padFraction;
  const padLon = (maxLon - minLon || 0.001) * padFraction;
  return {
    width,
    height,
    minLat: minLat - padLat,
    maxLat: maxLat + padLat,
    minLon: minLon - padLon,
    maxLon: maxLon + padLon,
    cosRef: Math.cos(((minLat + maxLat) / 2) * (Math.PI / 180)),
  };
}

/** Project to pixel coordinates; y grows downward, so north is up. */
export function project(vp: Viewport, lat: number, lon: number): [number, number] {
  const spanLon = (vp.maxLon - vp.minLon) * vp.cosRef;
  const spanLat = vp.maxLat - vp.minLat;
  const scale = Math.min(vp.width / spanLon, vp.height / spanLat);
  const x = (lon - vp.minLon) * vp.cosRef * scale;
  const y = vp.height - (lat - vp.minLat) * scale;
  return [x, y];
}
