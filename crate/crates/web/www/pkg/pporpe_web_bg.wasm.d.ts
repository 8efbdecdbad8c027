/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const loss_surface: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
export const relative_ratio_curve: (a: number, b: number, c: number) => [number, number];
export const threshold_trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
