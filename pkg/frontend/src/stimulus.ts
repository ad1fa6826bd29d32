// Letter-size arithmetic: the context s is log10 of the visual angle, so a
// unit step in s scales the rendered height tenfold.

export function stimulusHeightPx(s: number, calibration: number): number {
  if (!(calibration > 0)) {
    throw new Error("calibration must be a positive pixel scale");
  }
  return calibration * Math.pow(10, s);
}

export function clampToViewport(heightPx: number, maxPx: number): number {
  return Math.min(heightPx, maxPx);
}
