/* tslint:disable */
/* eslint-disable */

/**
 * Critical radius of a one-dimensional main effect at each sample size,
 * from the Gram spectrum of a uniform random design.
 */
export function critical_radius_curve(family: string, param: number, sizes: Uint32Array, seed: bigint): Float64Array;

/**
 * Fit a two-input meta-model (main effects and the interaction) to
 * simulated data; returns a JSON summary with main-effect curves.
 */
export function fit_demo(truth: string, n: number, alpha: number, sigma: number, seed: bigint): string;

/**
 * Unit-variance error density of shape `alpha` at each of `xs`.
 */
export function noise_density(alpha: number, xs: Float64Array): Float64Array;

/**
 * `count` unit-variance errors of shape `alpha`.
 */
export function noise_sample(alpha: number, count: number, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly critical_radius_curve: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly fit_demo: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly noise_density: (a: number, b: number, c: number) => [number, number, number, number];
    readonly noise_sample: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
