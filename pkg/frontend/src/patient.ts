// Deterministic simulated observer for demo mode and the automated driver.
// Mirrors the response model the service optimizes against: a guess-rate
// floor plus a cumulative-normal psychometric curve in letter size.

const GUESS_RATE = 1 / 26;

function erf(x: number): number {
  // Abramowitz-Stegun 7.1.26, |error| < 1.5e-7
  const sign = x < 0 ? -1 : 1;
  const t = 1 / (1 + 0.3275911 * Math.abs(x));
  const y =
    1 -
    (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t +
      0.254829592) *
      t *
      Math.exp(-x * x);
  return sign * y;
}

export function normCdf(z: number): number {
  return 0.5 * (1 + erf(z / Math.SQRT2));
}

export class Lcg {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  next(): number {
    // Numerical Recipes LCG; plenty for a demo patient
    this.state = (Math.imul(1664525, this.state) + 1013904223) >>> 0;
    return this.state / 4294967296;
  }
}

export class SimulatedPatient {
  constructor(
    public trueSphere: number,
    public trueCylinder: number,
    public slope: number,
    private rng: Lcg,
  ) {
    if (slope <= 0) throw new Error("slope must be positive");
  }

  acuity(x: [number, number]): number {
    const rs = x[0] - this.trueSphere;
    const rc = x[1] - this.trueCylinder;
    const blur = Math.sqrt(0.5 * (rs * rs + (rs + rc) * (rs + rc)));
    return Math.log10(1 + blur * blur);
  }

  responseProb(s: number, x: [number, number]): number {
    const latent = this.slope * (s - this.acuity(x));
    return GUESS_RATE + (1 - GUESS_RATE) * normCdf(latent);
  }

  respond(s: number, x: [number, number]): 0 | 1 {
    return this.rng.next() < this.responseProb(s, x) ? 1 : 0;
  }
}
