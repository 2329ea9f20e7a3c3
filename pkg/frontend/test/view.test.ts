// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from 'vitest';

import { controlsFor } from '../src/controller.js';
import {
  ViewElements,
  appendCard,
  bindElements,
  clearCards,
  markFinalCard,
  renderBanner,
  renderChoice,
  renderControls,
  renderGallery,
  renderStatus,
} from '../src/view.js';
import { card, snap } from './fixtures.js';

function mount(): ViewElements {
  document.body.innerHTML = `
    <div id="banner"></div>
    <div id="gallery"></div>
    <button id="btn-start"></button>
    <button id="btn-pause"></button>
    <button id="btn-resume"></button>
    <button id="btn-stop"></button>
    <span id="status-badge"></span>
    <select id="label-select"></select>
    <button id="btn-choose"></button>
    <div id="progress"></div>
    <div id="cards"></div>
    <div id="choice-log"></div>`;
  return bindElements(document);
}

describe('gallery', () => {
  let view: ViewElements;

  beforeEach(() => {
    view = mount();
  });

  it('renders one tile per input and reports picks', () => {
    const onPick = vi.fn();
    renderGallery(view, [
      { id: 'input-00', label: 'class 1', features: [0] },
      { id: 'input-01', label: 'class 4', features: [1] },
    ], onPick);

    const tiles = view.gallery.querySelectorAll<HTMLButtonElement>('.tile');
    expect(tiles).toHaveLength(2);
    tiles[1].click();
    expect(onPick).toHaveBeenCalledWith('input-01');
    expect(tiles[1].classList.contains('selected')).toBe(true);

    tiles[0].click();
    expect(tiles[0].classList.contains('selected')).toBe(true);
    expect(tiles[1].classList.contains('selected')).toBe(false);
  });

  it('fills the manual-choice selector with unique sorted labels', () => {
    renderGallery(view, [
      { id: 'input-00', label: 'class 3', features: [0] },
      { id: 'input-01', label: 'class 0', features: [1] },
      { id: 'input-02', label: 'class 3', features: [2] },
    ], () => undefined);

    const options = [...view.labelSelect.options].map((o) => o.value);
    expect(options).toEqual(['class 0', 'class 3']);
  });
});

describe('stage cards', () => {
  let view: ViewElements;

  beforeEach(() => {
    view = mount();
  });

  it('shows the bits, predicted class, confidence and elapsed time', () => {
    appendCard(view, {
      stage: 3, bits: 6, class_index: 4, confidence: 0.873,
      probabilities: [], elapsed_s: 1.236,
    });

    const el = view.cards.querySelector('.card') as HTMLElement;
    expect(el.querySelector('.card-head')?.textContent).toContain('stage 3');
    expect(el.querySelector('.card-head')?.textContent).toContain('6-bit');
    expect(el.querySelector('.card-class')?.textContent).toBe('class 4');
    expect(el.querySelector('.card-meta')?.textContent).toContain('87.3%');
    expect(el.querySelector('.card-meta')?.textContent).toContain('1.24s');
  });

  it('leaves exactly two cards after a stop at stage 2', () => {
    appendCard(view, card(1));
    appendCard(view, card(2));
    renderStatus(view, snap({
      status: 'stopped', stages_received: 2, results: [card(1), card(2)],
    }));

    expect(view.cards.querySelectorAll('.card')).toHaveLength(2);
    expect(view.status.textContent).toBe('stopped');
    expect(view.status.className).toContain('badge-stopped');
  });

  it('ignores a card for an already-rendered stage', () => {
    appendCard(view, card(1));
    appendCard(view, card(1));
    expect(view.cards.querySelectorAll('.card')).toHaveLength(1);
  });

  it('marks only the final card of a complete run', () => {
    for (let stage = 1; stage <= 8; stage++) {
      appendCard(view, card(stage));
    }
    renderStatus(view, snap({
      status: 'complete',
      stages_received: 8,
      results: [1, 2, 3, 4, 5, 6, 7, 8].map(card),
    }));

    const cards = view.cards.querySelectorAll('.card');
    expect(cards).toHaveLength(8);
    expect(cards[7].classList.contains('final')).toBe(true);
    expect(cards[7].querySelector('.card-final')?.textContent).toBe('complete');
    expect(view.cards.querySelectorAll('.card-final')).toHaveLength(1);

    markFinalCard(view); // idempotent
    expect(view.cards.querySelectorAll('.card-final')).toHaveLength(1);
  });

  it('clears between runs', () => {
    appendCard(view, card(1));
    clearCards(view);
    expect(view.cards.querySelectorAll('.card')).toHaveLength(0);
  });
});

describe('status line and controls', () => {
  let view: ViewElements;

  beforeEach(() => {
    view = mount();
  });

  it('summarizes progress as stages, bytes and elapsed seconds', () => {
    renderStatus(view, snap({
      stages_received: 3, stages_total: 8,
      bytes_received: 770_304, elapsed_s: 7.71,
    }));
    expect(view.progress.textContent).toBe('3/8 stages · 770,304 bytes · 7.7s');
  });

  it('disables the controls the state machine forbids', () => {
    renderControls(view, controlsFor('paused'));
    expect(view.buttons.start.disabled).toBe(true);
    expect(view.buttons.pause.disabled).toBe(true);
    expect(view.buttons.resume.disabled).toBe(false);
    expect(view.buttons.stop.disabled).toBe(false);
    expect(view.buttons.choose.disabled).toBe(false);

    renderControls(view, controlsFor('stopped'));
    expect(view.buttons.resume.disabled).toBe(true);
    expect(view.buttons.stop.disabled).toBe(true);
    expect(view.buttons.start.disabled).toBe(false);
  });

  it('shows and hides the connection banner', () => {
    renderBanner(view, 'control service unreachable — retrying');
    expect(view.banner.style.display).toBe('block');
    expect(view.banner.textContent).toContain('unreachable');

    renderBanner(view, null);
    expect(view.banner.style.display).toBe('none');
    expect(view.banner.textContent).toBe('');
  });

  it('logs a manual choice with its transmission context', () => {
    renderChoice(view, { label: 'class 5', while_transmitting: true });
    expect(view.choiceLog.textContent).toBe(
      'you picked class 5 (while still transmitting)');

    renderChoice(view, { label: 'class 2', while_transmitting: false });
    expect(view.choiceLog.textContent).toBe(
      'you picked class 2 (after the transfer ended)');

    renderChoice(view, null);
    expect(view.choiceLog.textContent).toBe('');
  });
});
