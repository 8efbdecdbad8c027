/* tslint:disable */
/* eslint-disable */

/**
 * Negative per-sample losses on `n` evenly spaced ratios in `[rho_min, rho_max]`.
 */
export function loss_surface(epsilon: number, beta: number, eta: number, advantage: number, rho_min: number, rho_max: number, n: number): Float64Array;

/**
 * Pairs `rho, rho_beta` on a log-spaced grid over `[1 / rho_max, rho_max]`.
 */
export function relative_ratio_curve(beta: number, rho_max: number, n: number): Float64Array;

/**
 * Feeds `steps` batches of `batch` deviations, each uniform on
 * `level * [1 - spread, 1 + spread]`, and records `delta, epsilon` after
 * every update.
 */
export function threshold_trace(level: number, spread: number, batch: number, steps: number, lambda: number, kappa: number, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly loss_surface: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly relative_ratio_curve: (a: number, b: number, c: number) => [number, number];
    readonly threshold_trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
