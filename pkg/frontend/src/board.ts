import { footprint, heightAt, isCircle } from "./circles";
import type { Cell, GameView } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";
const CELL = 34;
const PAD = 18;

export interface BoardEvents {
  onHover: (cell: Cell | null) => void;
  onPick: (cell: Cell) => void;
}

/** Top-down placement board: one square per (x, y) column shaded by stack
 *  height, a circle on every cell the service marked placeable for the
 *  selected orientation.  Clicking a circle commits that cell. */
export class Board {
  private readonly svg: SVGSVGElement;
  private view: GameView | null = null;
  private orientation = 0;
  private highlight: Cell | null = null;

  constructor(host: HTMLElement, private readonly events: BoardEvents) {
    this.svg = document.createElementNS(SVG_NS, "svg");
    this.svg.classList.add("board");
    host.appendChild(this.svg);
    this.svg.addEventListener("mouseleave", () => this.events.onHover(null));
  }

  setOrientation(orientation: number): void {
    this.orientation = orientation;
    this.render();
  }

  setHighlight(cell: Cell | null): void {
    this.highlight = cell;
    this.render();
  }

  update(view: GameView): void {
    this.view = view;
    if (!view.mask || this.orientation >= view.mask.length) this.orientation = 0;
    this.render();
  }

  private render(): void {
    const view = this.view;
    this.svg.replaceChildren();
    if (!view) return;
    const [L, W, H] = view.bin;
    this.svg.setAttribute("width", String(L * CELL + 2 * PAD));
    this.svg.setAttribute("height", String(W * CELL + 2 * PAD));

    for (let x = 0; x < L; x++) {
      for (let y = 0; y < W; y++) {
        const height = heightAt(view, x, y);
        const rect = document.createElementNS(SVG_NS, "rect");
        rect.setAttribute("x", String(PAD + x * CELL));
        rect.setAttribute("y", String(PAD + y * CELL));
        rect.setAttribute("width", String(CELL - 1));
        rect.setAttribute("height", String(CELL - 1));
        const lum = height === 0 ? 16 : 28 + Math.round((height / H) * 46);
        rect.setAttribute("fill", `hsl(214 32% ${lum}%)`);
        this.svg.appendChild(rect);
        if (height > 0) {
          const label = document.createElementNS(SVG_NS, "text");
          label.setAttribute("x", String(PAD + x * CELL + CELL / 2));
          label.setAttribute("y", String(PAD + y * CELL + CELL / 2 + 4));
          label.setAttribute("class", "board-height");
          label.textContent = String(height);
          this.svg.appendChild(label);
        }

        const cell: Cell = { x, y, orientation: this.orientation };
        if (!view.done && isCircle(view, cell)) {
          const circle = document.createElementNS(SVG_NS, "circle");
          circle.setAttribute("cx", String(PAD + x * CELL + CELL / 2));
          circle.setAttribute("cy", String(PAD + y * CELL + CELL / 2));
          circle.setAttribute("r", String(CELL / 4));
          circle.setAttribute("class", "board-circle");
          circle.addEventListener("mouseenter", () => this.events.onHover(cell));
          circle.addEventListener("click", () => this.events.onPick(cell));
          this.svg.appendChild(circle);
        }
      }
    }

    if (this.highlight && view.current_item && !view.done) {
      const [l, w] = footprint(view.current_item, this.highlight.orientation);
      const outline = document.createElementNS(SVG_NS, "rect");
      outline.setAttribute("x", String(PAD + this.highlight.x * CELL));
      outline.setAttribute("y", String(PAD + this.highlight.y * CELL));
      outline.setAttribute("width", String(l * CELL - 1));
      outline.setAttribute("height", String(w * CELL - 1));
      outline.setAttribute("class", "board-footprint");
      this.svg.appendChild(outline);
    }

    for (let x = 0; x < L; x++) this.axisLabel(PAD + x * CELL + CELL / 2, 11, String(x));
    for (let y = 0; y < W; y++) this.axisLabel(8, PAD + y * CELL + CELL / 2 + 4, String(y));
  }

  private axisLabel(x: number, y: number, text: string): void {
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(x));
    label.setAttribute("y", String(y));
    label.setAttribute("class", "board-axis");
    label.textContent = text;
    this.svg.appendChild(label);
  }
}
