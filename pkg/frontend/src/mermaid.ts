/**
 * Client-side diagram rendering. The engine ships Mermaid source only;
 * if the mermaid library (vendor script or global) is unavailable or
 * rendering throws, the raw source is shown instead.
 */

let initialized = false;

function sourceFallback(container: HTMLElement, source: string): void {
  const pre = document.createElement('pre');
  pre.className = 'diagram-source';
  pre.textContent = source;
  container.replaceChildren(pre);
}

export async function renderDiagram(
  container: HTMLElement,
  source: string,
): Promise<void> {
  const mermaid = (globalThis as { mermaid?: any }).mermaid;
  if (!mermaid?.render) {
    sourceFallback(container, source);
    return;
  }
  try {
    if (!initialized) {
      mermaid.initialize?.({ startOnLoad: false, securityLevel: 'strict' });
      initialized = true;
    }
    // v9 returns the SVG string; v10+ resolves to { svg }.
    const result = mermaid.render(`diagram-${Date.now()}`, source);
    const svg =
      typeof result === 'string' ? result : (await result).svg;
    container.innerHTML = svg;
  } catch {
    sourceFallback(container, source);
  }
}
