/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_filtersview_free: (a: number, b: number) => void;
export const __wbg_spectrumview_free: (a: number, b: number) => void;
export const dirichletHistograms: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const filtersview_channels: (a: number) => number;
export const filtersview_eigenvalues: (a: number) => [number, number];
export const filtersview_gamma: (a: number) => [number, number];
export const filtersview_losses: (a: number) => [number, number];
export const filtersview_testAccuracy: (a: number) => number;
export const sbmSpectrum: (a: number, b: number) => [number, number, number];
export const spectrumview_edges: (a: number) => number;
export const spectrumview_eigenvalues: (a: number) => [number, number];
export const spectrumview_homophily: (a: number) => number;
export const trainFilters: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
