/**
 * Page bootstrap: bind the DOM, load the input gallery, and wire the
 * controls to a SessionController. Service endpoints come from query
 * parameters so the static page can point at any running backend:
 *
 *   index.html?control=http://127.0.0.1:8600&server=http://127.0.0.1:8731
 */

import { ControlClient } from './api.js';
import { SessionController } from './controller.js';
import {
  appendCard,
  bindElements,
  clearCards,
  renderBanner,
  renderChoice,
  renderControls,
  renderGallery,
  renderStatus,
} from './view.js';

const params = new URLSearchParams(window.location.search);
const controlUrl = params.get('control') ?? 'http://127.0.0.1:8600';
const serverUrl = params.get('server') ?? 'http://127.0.0.1:8731';

const view = bindElements(document);
const client = new ControlClient(controlUrl);
let selectedInput: string | null = null;

const controller = new SessionController(client, {
  onCard: (card) => appendCard(view, card),
  onSnapshot: (snapshot) => {
    renderStatus(view, snapshot);
    renderControls(view, controller.controls());
    renderChoice(view, snapshot.choice);
  },
  onBanner: (message) => renderBanner(view, message),
});

view.buttons.start.addEventListener('click', () => {
  if (selectedInput === null) {
    renderBanner(view, 'pick an input first');
    return;
  }
  clearCards(view);
  renderChoice(view, null);
  void controller.start(serverUrl, selectedInput);
});
view.buttons.pause.addEventListener('click', () => void controller.pause());
view.buttons.resume.addEventListener('click', () => void controller.resume());
view.buttons.stop.addEventListener('click', () => void controller.stop());
view.buttons.choose.addEventListener('click', () => {
  void controller.choose(view.labelSelect.value);
});

renderBanner(view, null);
renderControls(view, controller.controls());

client
  .listInputs()
  .then((inputs) => {
    renderGallery(view, inputs, (inputId) => {
      selectedInput = inputId;
      renderBanner(view, null);
    });
  })
  .catch(() => renderBanner(view, `cannot reach control service at ${controlUrl}`));
