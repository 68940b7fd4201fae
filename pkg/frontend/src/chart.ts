// Hand-rolled SVG series chart: observed/forecast lines, an optional
// uncertainty band, a range slider that narrows the window, and a
// hover readout. The geometry helpers are pure and unit-tested; the
// class below only wires them to the DOM.

export interface Scale {
  (v: number): number;
  invert(px: number): number;
}

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.invert = (px: number) => d0 + ((px - r0) / (r1 - r0 || 1)) * span;
  return f;
}

// Null values split the path so gaps stay visible as gaps.
export function linePath(
  xs: number[],
  ys: (number | null)[],
  x: Scale,
  y: Scale,
): string {
  const parts: string[] = [];
  let pen = false;
  for (let i = 0; i < xs.length; i++) {
    const v = ys[i];
    if (v === null || Number.isNaN(v)) {
      pen = false;
      continue;
    }
    parts.push(`${pen ? "L" : "M"}${x(xs[i]).toFixed(2)},${y(v).toFixed(2)}`);
    pen = true;
  }
  return parts.join("");
}

// Closed region between lower and upper, one polygon per contiguous
// stretch where both bounds exist.
export function bandPath(
  xs: number[],
  lower: (number | null)[],
  upper: (number | null)[],
  x: Scale,
  y: Scale,
): string {
  const parts: string[] = [];
  let run: number[] = [];
  const flush = () => {
    if (run.length < 2) {
      run = [];
      return;
    }
    const top = run.map((i) => `${x(xs[i]).toFixed(2)},${y(upper[i] as number).toFixed(2)}`);
    const bottom = [...run].reverse()
      .map((i) => `${x(xs[i]).toFixed(2)},${y(lower[i] as number).toFixed(2)}`);
    parts.push(`M${top.join("L")}L${bottom.join("L")}Z`);
    run = [];
  };
  for (let i = 0; i < xs.length; i++) {
    if (lower[i] === null || upper[i] === null) flush();
    else run.push(i);
  }
  flush();
  return parts.join("");
}

export function nearestIndex(xs: number[], target: number): number {
  if (xs.length === 0) return -1;
  let lo = 0;
  let hi = xs.length - 1;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (xs[mid] < target) lo = mid;
    else hi = mid;
  }
  return Math.abs(xs[lo] - target) <= Math.abs(xs[hi] - target) ? lo : hi;
}

export function niceTicks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo;
  if (span <= 0) return [lo];
  const raw = span / count;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= raw) ?? raw;
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-9 * span; v += step) out.push(v);
  return out;
}

export interface ChartSeries {
  label: string;
  xs: number[];
  ys: (number | null)[];
  color: string;
  dash?: string;
}

export interface ChartBand {
  xs: number[];
  lower: (number | null)[];
  upper: (number | null)[];
}

export interface ChartData {
  series: ChartSeries[];
  band?: ChartBand;
}

const SVG = "http://www.w3.org/2000/svg";

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

export class SeriesChart {
  private host: HTMLElement;
  private data: ChartData = { series: [] };
  private win: [number, number] = [0, 1];
  private width = 720;
  private height = 260;
  private pad = { left: 56, right: 12, top: 10, bottom: 24 };
  private formatX: (v: number) => string;

  constructor(host: HTMLElement, formatX?: (v: number) => string) {
    this.host = host;
    this.formatX = formatX ?? ((v) => new Date(v * 1000).toISOString().slice(0, 16) + "Z");
  }

  setData(data: ChartData): void {
    this.data = data;
    this.win = [0, 1];
    this.render();
  }

  private extent(): [number, number] {
    let lo = Infinity;
    let hi = -Infinity;
    for (const s of this.data.series) {
      for (const v of s.xs) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    }
    if (!Number.isFinite(lo)) return [0, 1];
    return [lo, hi];
  }

  private window(): [number, number] {
    const [lo, hi] = this.extent();
    return [lo + (hi - lo) * this.win[0], lo + (hi - lo) * this.win[1]];
  }

  render(): void {
    this.host.replaceChildren();
    const [x0, x1] = this.window();
    const visible = (xs: number[], i: number) => xs[i] >= x0 && xs[i] <= x1;

    let yLo = Infinity;
    let yHi = -Infinity;
    const widen = (v: number | null) => {
      if (v === null) return;
      if (v < yLo) yLo = v;
      if (v > yHi) yHi = v;
    };
    for (const s of this.data.series) {
      s.xs.forEach((_, i) => visible(s.xs, i) && widen(s.ys[i]));
    }
    const band = this.data.band;
    if (band) {
      band.xs.forEach((_, i) => {
        if (visible(band.xs, i)) {
          widen(band.lower[i]);
          widen(band.upper[i]);
        }
      });
    }
    if (!Number.isFinite(yLo)) {
      yLo = 0;
      yHi = 1;
    }
    const margin = (yHi - yLo || 1) * 0.08;
    yLo -= margin;
    yHi += margin;

    const { left, right, top, bottom } = this.pad;
    const x = linearScale(x0, x1, left, this.width - right);
    const y = linearScale(yLo, yHi, this.height - bottom, top);

    const svg = svgEl("svg", {
      viewBox: `0 0 ${this.width} ${this.height}`,
      class: "chart",
    });

    for (const tick of niceTicks(yLo, yHi)) {
      svg.append(svgEl("line", {
        x1: String(left), x2: String(this.width - right),
        y1: y(tick).toFixed(2), y2: y(tick).toFixed(2),
        class: "gridline",
      }));
      const label = svgEl("text", {
        x: String(left - 6), y: (y(tick) + 4).toFixed(2),
        class: "tick", "text-anchor": "end",
      });
      label.textContent = Math.abs(tick) >= 1000 ? tick.toFixed(0) : tick.toFixed(1);
      svg.append(label);
    }

    if (band) {
      svg.append(svgEl("path", {
        d: bandPath(band.xs, band.lower, band.upper, x, y),
        class: "band",
      }));
    }
    for (const s of this.data.series) {
      const attrs: Record<string, string> = {
        d: linePath(s.xs, s.ys, x, y),
        class: "line",
        stroke: s.color,
      };
      if (s.dash) attrs["stroke-dasharray"] = s.dash;
      svg.append(svgEl("path", attrs));
    }

    const hoverLine = svgEl("line", {
      y1: String(top), y2: String(this.height - bottom),
      class: "hoverline", visibility: "hidden",
    });
    svg.append(hoverLine);

    const readout = document.createElement("div");
    readout.className = "readout";
    readout.textContent = " ";

    svg.addEventListener("mousemove", (ev) => {
      const rect = (svg as unknown as SVGGraphicsElement).getBoundingClientRect();
      const px = ((ev.clientX - rect.left) / rect.width) * this.width;
      const ref = this.data.series[0];
      if (!ref || ref.xs.length === 0) return;
      const i = nearestIndex(ref.xs, x.invert(px));
      if (!visible(ref.xs, i)) return;
      const cx = x(ref.xs[i]).toFixed(2);
      hoverLine.setAttribute("x1", cx);
      hoverLine.setAttribute("x2", cx);
      hoverLine.setAttribute("visibility", "visible");
      const parts = [this.formatX(ref.xs[i])];
      for (const s of this.data.series) {
        const j = nearestIndex(s.xs, ref.xs[i]);
        const v = s.xs[j] === ref.xs[i] ? s.ys[j] : null;
        parts.push(`${s.label}: ${v === null ? "-" : v.toFixed(3)}`);
      }
      readout.textContent = parts.join("   ");
    });
    svg.addEventListener("mouseleave", () => {
      hoverLine.setAttribute("visibility", "hidden");
      readout.textContent = " ";
    });

    const slider = this.buildSlider();
    this.host.append(svg, readout, slider);
  }

  // Two coupled range inputs; the pair is the window in fractions of
  // the full extent.
  private buildSlider(): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "slider";
    const lo = document.createElement("input");
    const hi = document.createElement("input");
    for (const [input, value] of [[lo, this.win[0]], [hi, this.win[1]]] as const) {
      input.type = "range";
      input.min = "0";
      input.max = "1000";
      input.value = String(Math.round(value * 1000));
    }
    const apply = () => {
      let a = Number(lo.value) / 1000;
      let b = Number(hi.value) / 1000;
      if (a > b) [a, b] = [b, a];
      if (b - a < 0.01) b = Math.min(1, a + 0.01);
      this.win = [a, b];
      this.render();
    };
    lo.addEventListener("change", apply);
    hi.addEventListener("change", apply);
    const label = document.createElement("span");
    label.textContent = "window";
    wrap.append(label, lo, hi);
    return wrap;
  }
}
