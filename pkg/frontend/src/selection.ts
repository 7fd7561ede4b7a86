/** Map a DOM selection inside the rendered document back to character
 * offsets.
 *
 * The renderer emits one element per segment whose text nodes cover the
 * document text in order; badges are skipped (they are not text of the
 * document). Offsets are counted in code units of the original text, which
 * the renderer sliced verbatim, so no client-side arithmetic beyond
 * accumulation happens here.
 */

export interface RangeLike {
  startContainer: Node;
  startOffset: number;
  endContainer: Node;
  endOffset: number;
  collapsed?: boolean;
}

function* documentTextNodes(container: HTMLElement): Generator<Node> {
  const walk = (node: Node): Node[] => {
    const out: Node[] = [];
    node.childNodes.forEach((child) => {
      if (child.nodeType === 3) {
        out.push(child);
      } else if ((child as HTMLElement).classList?.contains("badge")) {
        // label badges are decoration, not document text
      } else {
        out.push(...walk(child));
      }
    });
    return out;
  };
  yield* walk(container);
}

function offsetAt(container: HTMLElement, target: Node, offsetInNode: number): number | null {
  let total = 0;
  for (const node of documentTextNodes(container)) {
    if (node === target) {
      return total + offsetInNode;
    }
    total += (node.textContent ?? "").length;
  }
  // selection endpoints may sit on an element rather than a text node
  if (target === container) {
    return offsetInNode === 0 ? 0 : total;
  }
  return null;
}

export function rangeToOffsets(
  container: HTMLElement,
  range: RangeLike,
): { start: number; end: number } | null {
  if (range.collapsed) {
    return null;
  }
  const start = offsetAt(container, range.startContainer, range.startOffset);
  const end = offsetAt(container, range.endContainer, range.endOffset);
  if (start === null || end === null || start >= end) {
    return null;
  }
  return { start, end };
}

/** Read the active window selection relative to the document container. */
export function selectionToOffsets(
  container: HTMLElement,
  win: Window,
): { start: number; end: number } | null {
  const selection = win.getSelection?.();
  if (!selection || selection.rangeCount === 0) {
    return null;
  }
  const range = selection.getRangeAt(0);
  if (!container.contains(range.startContainer) || !container.contains(range.endContainer)) {
    return null;
  }
  return rangeToOffsets(container, range);
}
