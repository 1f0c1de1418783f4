import { screenBlurSigmas } from "./blur.js";
import type {
  AutofocalStatePayload,
  GeometryInfo,
  LayoutInfo,
  PlacementInfo,
  ScreenInfo,
  TrialPresentPayload,
} from "./protocol.js";

// Same vertical aspect the server uses for screen hit testing.
const VERTICAL_ASPECT = 0.6;

export interface ScreenRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function screenRect(screen: ScreenInfo, geometry: GeometryInfo): ScreenRect {
  const degPerPx = geometry.horizontal_fov / geometry.image_width;
  const cx = screen.lateral_offset / degPerPx + geometry.image_width / 2;
  const cy = geometry.image_height / 2;
  const halfW = screen.angular_size / 2 / degPerPx;
  const halfH = (screen.angular_size * VERTICAL_ASPECT) / 2 / degPerPx;
  return { x: cx - halfW, y: cy - halfH, w: 2 * halfW, h: 2 * halfH };
}

// Mirrors the server's anchor table so stimuli land where the record says.
function placementPx(
  placement: PlacementInfo,
  screen: ScreenInfo,
  rect: ScreenRect,
): { x: number; y: number } {
  const halfW = screen.angular_size / 2;
  const halfH = (screen.angular_size * VERTICAL_ASPECT) / 2;
  const base: Record<string, [number, number]> = {
    center: [0, 0],
    corner_tl: [-0.7 * halfW, 0.7 * halfH],
    corner_tr: [0.7 * halfW, 0.7 * halfH],
    corner_bl: [-0.7 * halfW, -0.7 * halfH],
    corner_br: [0.7 * halfW, -0.7 * halfH],
  };
  const [bx, by] = base[placement.anchor] ?? [0, 0];
  const offX = Math.min(Math.max(bx + placement.jitter[0], -halfW), halfW);
  const offY = Math.min(Math.max(by + placement.jitter[1], -halfH), halfH);
  // elevation is up-positive; canvas y grows downward
  return {
    x: rect.x + rect.w / 2 + (offX / halfW) * (rect.w / 2),
    y: rect.y + rect.h / 2 - (offY / halfH) * (rect.h / 2),
  };
}

function drawLandoltRing(
  ctx: CanvasRenderingContext2D,
  x: number,
  y: number,
  radius: number,
  orientationDeg: number,
) {
  // gap direction: 0 deg points right, counted counter-clockwise
  const gapHalf = Math.PI / 8;
  const center = (-orientationDeg * Math.PI) / 180;
  ctx.beginPath();
  ctx.arc(x, y, radius, center + gapHalf, center - gapHalf + 2 * Math.PI);
  ctx.lineWidth = Math.max(2, radius / 2.5);
  ctx.stroke();
}

function drawSloanLetter(
  ctx: CanvasRenderingContext2D,
  x: number,
  y: number,
  size: number,
  letter: string,
) {
  ctx.font = `bold ${Math.round(size)}px "Courier New", monospace`;
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  ctx.fillText(letter, x, y);
}

function drawTable(
  ctx: CanvasRenderingContext2D,
  rect: ScreenRect,
  table: Record<string, string>,
) {
  const orientations = Object.keys(table)
    .map(Number)
    .sort((a, b) => a - b);
  const cell = rect.w / orientations.length;
  const ringR = Math.min(cell * 0.28, rect.h * 0.18);
  orientations.forEach((orientation, i) => {
    const cx = rect.x + cell * (i + 0.5);
    drawLandoltRing(ctx, cx, rect.y + rect.h * 0.35, ringR, orientation);
    drawSloanLetter(ctx, cx, rect.y + rect.h * 0.7, ringR * 1.8, table[String(orientation)]);
  });
}

export interface SceneView {
  layout: LayoutInfo;
  geometry: GeometryInfo;
  trial: TrialPresentPayload | null;
  autofocal: AutofocalStatePayload | null;
}

/** Full scene repaint. Each screen is drawn under its own Gaussian filter
 *  so the live blur follows the focus state; far screens first. */
export function drawScene(ctx: CanvasRenderingContext2D, view: SceneView) {
  const { layout, geometry, trial, autofocal } = view;
  ctx.filter = "none";
  ctx.fillStyle = "#23252b";
  ctx.fillRect(0, 0, geometry.image_width, geometry.image_height);

  const sigmas = autofocal
    ? screenBlurSigmas(autofocal.per_screen_blur, geometry)
    : new Map<string, number>();
  const screens = [...layout.screens].sort((a, b) => b.distance - a.distance);

  for (const screen of screens) {
    const rect = screenRect(screen, geometry);
    const index = layout.screens.indexOf(screen);
    const sigma = sigmas.get(screen.name) ?? 0;
    ctx.save();
    ctx.filter = sigma > 0.1 ? `blur(${sigma.toFixed(2)}px)` : "none";

    ctx.fillStyle = "#e8e6df";
    ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
    ctx.strokeStyle = "#101114";
    ctx.lineWidth = 2;
    ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);

    ctx.fillStyle = "#101114";
    ctx.strokeStyle = "#101114";
    if (trial) {
      const optoSize = Math.min(rect.h * 0.35, rect.w * 0.2);
      if (index === trial.landolt_screen) {
        const p = placementPx(trial.placements.landolt, screen, rect);
        drawLandoltRing(ctx, p.x, p.y, optoSize / 2, trial.landolt_orientation);
      } else if (index === trial.sloan_screen) {
        const p = placementPx(trial.placements.sloan, screen, rect);
        drawSloanLetter(ctx, p.x, p.y, optoSize, trial.sloan_letter);
      } else if (index === trial.table_screen) {
        drawTable(ctx, rect, trial.table);
      }
    } else {
      ctx.font = `${Math.max(10, Math.round(rect.h * 0.12))}px system-ui, sans-serif`;
      ctx.textAlign = "center";
      ctx.textBaseline = "middle";
      ctx.fillText(screen.name, rect.x + rect.w / 2, rect.y + rect.h / 2);
    }
    ctx.restore();
  }
}
