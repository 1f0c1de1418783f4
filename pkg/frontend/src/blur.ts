import type { GeometryInfo, ScreenBlur } from "./protocol.js";

// The live view approximates the server's disc blur with a Gaussian of
// sigma = major_px / 2; exact disc rendering stays a server-side concern.

export function arcminPerPixel(geometry: GeometryInfo): number {
  return (geometry.horizontal_fov * 60) / geometry.image_width;
}

export function blurSigmaPx(majorArcmin: number, geometry: GeometryInfo): number {
  const majorPx = majorArcmin / arcminPerPixel(geometry);
  return majorPx / 2;
}

/** Per-screen CSS/canvas blur radii from the latest server summary. */
export function screenBlurSigmas(
  perScreen: ScreenBlur[],
  geometry: GeometryInfo,
): Map<string, number> {
  const sigmas = new Map<string, number>();
  for (const entry of perScreen) {
    sigmas.set(entry.screen, blurSigmaPx(entry.major_arcmin, geometry));
  }
  return sigmas;
}
