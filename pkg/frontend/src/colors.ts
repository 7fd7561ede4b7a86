/** Deterministic layer colors: the same layer name always renders the same
 * hue, so screenshots and tests are reproducible. */

function hashString(text: string): number {
  let hash = 2166136261;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 16777619);
  }
  return hash >>> 0;
}

export function layerColor(layerName: string): string {
  const hue = hashString(layerName) % 360;
  return `hsl(${hue}, 70%, 78%)`;
}

export function layerBorderColor(layerName: string): string {
  const hue = hashString(layerName) % 360;
  return `hsl(${hue}, 65%, 45%)`;
}
