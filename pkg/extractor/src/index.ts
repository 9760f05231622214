export { decodeOsf1, encodeOsf1, readOsf1, writeOsf1, type PriorVector } from './osf1.js';
export { decodePpm, readPpm, type RgbImage } from './ppm.js';
export {
  MODEL_TAGS, POOLINGS, embedImage, embeddingWidth, loadLocalModel, validateSpec,
  type Embedding, type ExtractorSpec, type ModelTag, type Pooling,
} from './models.js';
export { extract, type ExtractOptions, type ExtractResult } from './extract.js';
export { makeFixtureModel, saveModelDir, type FixtureKind } from './fixture.js';
