/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const coc_map: (a: number, b: number, c: number, d: number) => [number, number];
export const default_focus: (a: number) => number;
export const render_defocus: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const render_sharp: (a: number, b: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
