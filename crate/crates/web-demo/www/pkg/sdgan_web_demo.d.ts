/* tslint:disable */
/* eslint-disable */

export function simulateFlow(eta_g: number, eta_d: number, eta_phi: number, alpha: number, c: number, t_end: number, theta0: number, psi0: number): Float64Array;

export function simulatePlay(lr: number, alpha: number, beta: number, steps: number, theta0: number, psi0: number): Float64Array;

export function stabilityMap(eta_g: number, eta_d: number, c: number, alpha_max: number, eta_phi_max: number, n: number): Float64Array;

export function stabilityReport(eta_g: number, eta_d: number, eta_phi: number, alpha: number, c: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly simulateFlow: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly simulatePlay: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly stabilityMap: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly stabilityReport: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
