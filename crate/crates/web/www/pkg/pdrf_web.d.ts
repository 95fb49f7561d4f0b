/* tslint:disable */
/* eslint-disable */

/**
 * Circle-of-confusion radius per pixel as a heat map; escaped rays are blue.
 */
export function coc_map(azimuth_deg: number, res: number, aperture: number, focus: number): Uint8Array;

/**
 * Depth of the surface under the image centre; a sensible default focus.
 */
export function default_focus(azimuth_deg: number): number;

/**
 * Thin-lens render focused at axial depth `focus`.
 */
export function render_defocus(azimuth_deg: number, res: number, aperture: number, focus: number, samples: number): Uint8Array;

/**
 * Pinhole render of the preset scene.
 */
export function render_sharp(azimuth_deg: number, res: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly coc_map: (a: number, b: number, c: number, d: number) => [number, number];
    readonly default_focus: (a: number) => number;
    readonly render_defocus: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly render_sharp: (a: number, b: number) => [number, number];
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
