/* tslint:disable */
/* eslint-disable */

export function convergenceCurve(seed: number, trials: number, lines: number, noise: number, max_deviation_deg: number, steps: number): string;

export function costLandscape(seed: number, lines: number, noise: number, half_width: number, resolution: number): string;

/**
 * `variant` is one of `rt2pl`, `point_irls`, `nbc`, `nbc_mini`.
 */
export function estimatePose(seed: number, points: number, lines: number, noise: number, outliers: number, variant: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly convergenceCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly costLandscape: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly estimatePose: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
