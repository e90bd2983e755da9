/* tslint:disable */
/* eslint-disable */

export class FiltersView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    channels(): number;
    eigenvalues(): Float64Array;
    gamma(): Float64Array;
    losses(): Float64Array;
    testAccuracy(): number;
}

export class SpectrumView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    edges(): number;
    eigenvalues(): Float64Array;
    homophily(): number;
}

export function dirichletHistograms(blocks: Uint32Array, clients: number, alpha: number, seed: number): Uint32Array;

export function sbmSpectrum(spec: string): SpectrumView;

export function trainFilters(spec: string, epochs: number, rk: number, seed: number): FiltersView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_filtersview_free: (a: number, b: number) => void;
    readonly __wbg_spectrumview_free: (a: number, b: number) => void;
    readonly dirichletHistograms: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly filtersview_channels: (a: number) => number;
    readonly filtersview_eigenvalues: (a: number) => [number, number];
    readonly filtersview_gamma: (a: number) => [number, number];
    readonly filtersview_losses: (a: number) => [number, number];
    readonly filtersview_testAccuracy: (a: number) => number;
    readonly sbmSpectrum: (a: number, b: number) => [number, number, number];
    readonly spectrumview_edges: (a: number) => number;
    readonly spectrumview_eigenvalues: (a: number) => [number, number];
    readonly spectrumview_homophily: (a: number) => number;
    readonly trainFilters: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
