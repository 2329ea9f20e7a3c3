/**
 * DOM rendering for the demo page. No framework: every function takes the
 * bound elements and paints the latest server-reported state into them.
 * Cards are append-only and keyed by stage number, so they appear in
 * strictly increasing stage order and never re-shuffle.
 */

import { Choice, DemoInput, SessionSnapshot, StageCard } from './api.js';
import { ControlsState } from './controller.js';

export interface ViewElements {
  gallery: HTMLElement;
  cards: HTMLElement;
  status: HTMLElement;
  progress: HTMLElement;
  banner: HTMLElement;
  choiceLog: HTMLElement;
  labelSelect: HTMLSelectElement;
  buttons: {
    start: HTMLButtonElement;
    pause: HTMLButtonElement;
    resume: HTMLButtonElement;
    stop: HTMLButtonElement;
    choose: HTMLButtonElement;
  };
}

function byId<T extends HTMLElement>(doc: Document, id: string): T {
  const el = doc.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

export function bindElements(doc: Document): ViewElements {
  return {
    gallery: byId(doc, 'gallery'),
    cards: byId(doc, 'cards'),
    status: byId(doc, 'status-badge'),
    progress: byId(doc, 'progress'),
    banner: byId(doc, 'banner'),
    choiceLog: byId(doc, 'choice-log'),
    labelSelect: byId<HTMLSelectElement>(doc, 'label-select'),
    buttons: {
      start: byId<HTMLButtonElement>(doc, 'btn-start'),
      pause: byId<HTMLButtonElement>(doc, 'btn-pause'),
      resume: byId<HTMLButtonElement>(doc, 'btn-resume'),
      stop: byId<HTMLButtonElement>(doc, 'btn-stop'),
      choose: byId<HTMLButtonElement>(doc, 'btn-choose'),
    },
  };
}

/** Input gallery: one tile per demo input; clicking selects it. */
export function renderGallery(
  view: ViewElements,
  inputs: DemoInput[],
  onPick: (inputId: string) => void,
): void {
  const doc = view.gallery.ownerDocument;
  view.gallery.textContent = '';
  view.labelSelect.textContent = '';
  const labels = new Set<string>();
  for (const input of inputs) {
    const tile = doc.createElement('button');
    tile.type = 'button';
    tile.className = 'tile';
    tile.dataset.inputId = input.id;
    tile.textContent = `${input.id} (${input.label})`;
    tile.addEventListener('click', () => {
      for (const other of view.gallery.querySelectorAll('.tile')) {
        other.classList.remove('selected');
      }
      tile.classList.add('selected');
      onPick(input.id);
    });
    view.gallery.appendChild(tile);
    labels.add(input.label);
  }
  for (const label of [...labels].sort()) {
    const option = doc.createElement('option');
    option.value = label;
    option.textContent = label;
    view.labelSelect.appendChild(option);
  }
}

export function clearCards(view: ViewElements): void {
  view.cards.textContent = '';
}

/** Append one stage card; ignores stages already rendered. */
export function appendCard(view: ViewElements, card: StageCard): void {
  const selector = `[data-stage="${card.stage}"]`;
  if (view.cards.querySelector(selector) !== null) {
    return;
  }
  const doc = view.cards.ownerDocument;
  const el = doc.createElement('div');
  el.className = 'card';
  el.dataset.stage = String(card.stage);

  const head = doc.createElement('div');
  head.className = 'card-head';
  head.textContent = `stage ${card.stage} · ${card.bits}-bit`;

  const klass = doc.createElement('div');
  klass.className = 'card-class';
  klass.textContent = `class ${card.class_index}`;

  const meta = doc.createElement('div');
  meta.className = 'card-meta';
  meta.textContent =
    `confidence ${(card.confidence * 100).toFixed(1)}% · ${card.elapsed_s.toFixed(2)}s`;

  el.append(head, klass, meta);
  view.cards.appendChild(el);
}

/** Tag the last card once the transfer has delivered every stage. */
export function markFinalCard(view: ViewElements): void {
  const cards = view.cards.querySelectorAll('.card');
  if (cards.length === 0) return;
  const last = cards[cards.length - 1];
  if (last.querySelector('.card-final') === null) {
    const badge = view.cards.ownerDocument.createElement('div');
    badge.className = 'card-final';
    badge.textContent = 'complete';
    last.appendChild(badge);
    last.classList.add('final');
  }
}

export function renderStatus(view: ViewElements, snapshot: SessionSnapshot): void {
  view.status.textContent = snapshot.status;
  view.status.className = `badge badge-${snapshot.status}`;
  view.progress.textContent =
    `${snapshot.stages_received}/${snapshot.stages_total} stages · ` +
    `${snapshot.bytes_received.toLocaleString('en-US')} bytes · ` +
    `${snapshot.elapsed_s.toFixed(1)}s`;
  if (snapshot.status === 'complete') {
    markFinalCard(view);
  }
}

export function renderControls(view: ViewElements, controls: ControlsState): void {
  view.buttons.start.disabled = !controls.start;
  view.buttons.pause.disabled = !controls.pause;
  view.buttons.resume.disabled = !controls.resume;
  view.buttons.stop.disabled = !controls.stop;
  view.buttons.choose.disabled = !controls.choose;
  view.labelSelect.disabled = !controls.choose;
}

/** Connection banner; null hides it. */
export function renderBanner(view: ViewElements, message: string | null): void {
  view.banner.textContent = message ?? '';
  view.banner.style.display = message === null ? 'none' : 'block';
}

/** Manual-choice log line, including whether the transfer was still live. */
export function renderChoice(view: ViewElements, choice: Choice | null): void {
  if (choice === null) {
    view.choiceLog.textContent = '';
    return;
  }
  const when = choice.while_transmitting
    ? 'while still transmitting'
    : 'after the transfer ended';
  view.choiceLog.textContent = `you picked ${choice.label} (${when})`;
}
