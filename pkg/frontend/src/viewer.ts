/** Slice viewer: a windowed CT base layer plus one overlay-only layer per
 *  organ, so toggling an organ never refetches the base image. Wheel and
 *  arrow keys scroll slices; axis buttons switch planes. */

import { OrganInfo, ReviewApi } from "./api";
import { ViewerPose, clampSlice, scrollSlice, switchAxis, toggleOverlay } from "./state";

export interface ViewerCallbacks {
  onPoseChange(pose: ViewerPose): void;
}

const AXIS_LABELS = ["axis 0", "axis 1", "axis 2"];

export class SliceViewer {
  readonly root: HTMLElement;
  private readonly stack: HTMLDivElement;
  private readonly baseImg: HTMLImageElement;
  private readonly organLayers = new Map<string, HTMLImageElement>();
  private readonly slider: HTMLInputElement;
  private readonly status: HTMLSpanElement;
  private pose: ViewerPose;

  constructor(
    private readonly api: ReviewApi,
    private readonly caseId: string,
    private readonly dims: [number, number, number],
    private readonly organs: OrganInfo[],
    private readonly axisNames: [string, string, string],
    pose: ViewerPose,
    private readonly callbacks: ViewerCallbacks,
  ) {
    this.pose = { ...pose, sliceIndex: clampSlice(dims, pose.axis, pose.sliceIndex) };
    this.root = document.createElement("div");
    this.root.className = "viewer";

    const controls = document.createElement("div");
    controls.className = "viewer-controls";
    for (let axis = 0; axis < 3; axis++) {
      const btn = document.createElement("button");
      btn.textContent = `${AXIS_LABELS[axis]} (${axisNames[axis]})`;
      btn.dataset.axis = String(axis);
      btn.addEventListener("click", () => this.setPose(switchAxis(this.pose, this.dims, axis)));
      controls.appendChild(btn);
    }
    this.root.appendChild(controls);

    this.stack = document.createElement("div");
    this.stack.className = "layer-stack";
    this.stack.tabIndex = 0;
    this.baseImg = document.createElement("img");
    this.baseImg.className = "layer layer-base";
    this.baseImg.alt = "CT slice";
    this.stack.appendChild(this.baseImg);
    for (const organ of organs.filter((o) => o.present)) {
      const layer = document.createElement("img");
      layer.className = "layer layer-overlay";
      layer.dataset.organ = organ.name;
      layer.alt = `${organ.name} contour`;
      this.organLayers.set(organ.name, layer);
      this.stack.appendChild(layer);
    }
    this.stack.addEventListener("wheel", (event) => {
      event.preventDefault();
      this.setPose(scrollSlice(this.pose, this.dims, event.deltaY > 0 ? 1 : -1));
    });
    this.stack.addEventListener("keydown", (event) => {
      if (event.key === "ArrowUp" || event.key === "ArrowRight") {
        this.setPose(scrollSlice(this.pose, this.dims, 1));
      } else if (event.key === "ArrowDown" || event.key === "ArrowLeft") {
        this.setPose(scrollSlice(this.pose, this.dims, -1));
      }
    });
    this.root.appendChild(this.stack);

    const bar = document.createElement("div");
    bar.className = "viewer-bar";
    this.slider = document.createElement("input");
    this.slider.type = "range";
    this.slider.min = "0";
    this.slider.addEventListener("input", () => {
      this.setPose({ ...this.pose, sliceIndex: Number(this.slider.value) });
    });
    this.status = document.createElement("span");
    this.status.className = "viewer-status";
    bar.append(this.slider, this.status);
    this.root.appendChild(bar);

    const wl = document.createElement("div");
    wl.className = "viewer-wl";
    wl.append(
      this.numberField("window", this.pose.window, (value) =>
        this.setPose({ ...this.pose, window: value })),
      this.numberField("level", this.pose.level, (value) =>
        this.setPose({ ...this.pose, level: value })),
    );
    this.root.appendChild(wl);

    this.render();
  }

  private numberField(label: string, value: number,
                      onChange: (value: number) => void): HTMLLabelElement {
    const wrap = document.createElement("label");
    wrap.textContent = `${label} `;
    const input = document.createElement("input");
    input.type = "number";
    input.value = String(value);
    input.dataset.field = label;
    input.addEventListener("change", () => {
      const parsed = Number(input.value);
      if (Number.isFinite(parsed)) onChange(parsed);
    });
    wrap.appendChild(input);
    return wrap;
  }

  setPose(pose: ViewerPose): void {
    this.pose = pose;
    this.callbacks.onPoseChange(pose);
    this.render();
  }

  setOverlay(organ: string, visible: boolean): void {
    const currentlyOff = this.pose.overlaysOff.has(organ);
    if (currentlyOff === !visible) return;
    this.setPose(toggleOverlay(this.pose, organ));
  }

  currentPose(): ViewerPose {
    return this.pose;
  }

  private render(): void {
    const { axis, sliceIndex, window, level, overlaysOff } = this.pose;
    this.slider.max = String((this.dims[axis] ?? 1) - 1);
    this.slider.value = String(sliceIndex);
    this.status.textContent =
      `slice ${sliceIndex + 1}/${this.dims[axis]} along ${AXIS_LABELS[axis]}`;
    this.baseImg.src = this.api.sliceUrl(this.caseId, axis, sliceIndex,
                                         { window, level, mode: "base" });
    for (const [organ, layer] of this.organLayers) {
      const hidden = overlaysOff.has(organ);
      layer.style.display = hidden ? "none" : "";
      if (!hidden) {
        layer.src = this.api.sliceUrl(this.caseId, axis, sliceIndex,
                                      { overlays: [organ], mode: "overlay" });
      }
    }
  }
}
