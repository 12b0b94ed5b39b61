/** Minimal DOM construction helpers; the console uses no framework. */

export type Child = Node | string | null | undefined;

export interface ElProps {
  className?: string;
  id?: string;
  text?: string;
  title?: string;
  href?: string;
  src?: string;
  alt?: string;
  type?: string;
  value?: string;
  placeholder?: string;
  name?: string;
  disabled?: boolean;
  checked?: boolean;
  multiple?: boolean;
  onclick?: (ev: MouseEvent) => void;
  onchange?: (ev: Event) => void;
  onsubmit?: (ev: SubmitEvent) => void;
  oninput?: (ev: Event) => void;
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  props: ElProps = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (props.className !== undefined) node.className = props.className;
  if (props.id !== undefined) node.id = props.id;
  if (props.text !== undefined) node.textContent = props.text;
  if (props.title !== undefined) node.title = props.title;
  const anyNode = node as unknown as Record<string, unknown>;
  for (const key of ["href", "src", "alt", "type", "value", "placeholder",
                     "name"] as const) {
    if (props[key] !== undefined) anyNode[key] = props[key];
  }
  for (const key of ["disabled", "checked", "multiple"] as const) {
    if (props[key] !== undefined) anyNode[key] = props[key];
  }
  if (props.onclick) node.addEventListener("click", props.onclick as EventListener);
  if (props.onchange) node.addEventListener("change", props.onchange);
  if (props.oninput) node.addEventListener("input", props.oninput);
  if (props.onsubmit) node.addEventListener("submit", props.onsubmit as EventListener);
  for (const child of children) {
    if (child === null || child === undefined) continue;
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

/** One-line transient banner for errors and confirmations. */
export function banner(kind: "error" | "info", message: string): HTMLElement {
  return el("div", { className: `banner banner-${kind}`, text: message });
}
