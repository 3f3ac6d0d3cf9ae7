/** Geometry for the mode-shape polar plot: one arrow per member channel,
 * length = server-provided normalized amplitude, angle = server-provided
 * phase. Pure math from payload to SVG coordinates; no detection logic. */

import type { ModeShape } from './types.js';

export const MODE_COLORS = ['#e4572e', '#17bebb', '#76b041'];
export const MAX_MODES_SHOWN = 3;

export interface Arrow {
  channel: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  color: string;
}

export interface PolarLayout {
  size: number;
  center: number;
  radius: number;
  arrows: Arrow[];
}

export function arrowsForMode(
  shape: ModeShape,
  color: string,
  center: number,
  radius: number,
): Arrow[] {
  return Object.keys(shape)
    .sort()
    .map((channel) => {
      const [amplitude, phase] = shape[channel];
      return {
        channel,
        x1: center,
        y1: center,
        // SVG y grows downward; negate the sine so phase runs
        // counter-clockwise as on paper.
        x2: center + radius * amplitude * Math.cos(phase),
        y2: center - radius * amplitude * Math.sin(phase),
        color,
      };
    });
}

export function polarLayout(shapes: ModeShape[], size = 320): PolarLayout {
  const center = size / 2;
  const radius = size * 0.42;
  const arrows = shapes
    .slice(0, MAX_MODES_SHOWN)
    .flatMap((shape, index) =>
      arrowsForMode(shape, MODE_COLORS[index % MODE_COLORS.length], center, radius),
    );
  return { size, center, radius, arrows };
}
