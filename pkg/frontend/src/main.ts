/* Browser entry point: fetch the roster, render per-patient reports, and
 * wire pane events to the store through data-action delegation.
 */

import { ServiceClient } from './api.js';
import { AnswerCardController } from './cards.js';
import { renderDashboard, renderErrorBanner } from './render.js';
import {
    activeQuestion,
    chooseQuestion,
    clearBrush,
    clickFeature,
    clickGrouping,
    clickPatientDetails,
    clickRiskPane,
    initialState,
    selectGrouping,
    selectMonth,
    setStrategy,
    Store,
    type PaneState,
} from './state.js';
import type { PatientReport } from './types.js';

const BASE_URL = new URLSearchParams(location.search).get('service') ?? 'http://127.0.0.1:8000';

const client = new ServiceClient(BASE_URL);
const store = new Store(initialState());
let report: PatientReport | null = null;

const rootEl = document.getElementById('app');
if (rootEl === null) throw new Error('missing #app element');
const root: HTMLElement = rootEl;

const cards = new AnswerCardController(client, () => redraw());

function redraw(): void {
    if (report === null) return;
    root.innerHTML = renderDashboard(report, store.get(), (qid) => cards.phase(qid));
}

function requestActiveAnswer(): void {
    const state = store.get();
    if (report === null || state.patientId === null) return;
    const question = activeQuestion(report, state);
    if (question === null) return;
    void cards.request(state.patientId, question.id, state.strategy, state.scorer);
}

async function showPatient(patientId: string): Promise<void> {
    try {
        report = await client.report(patientId);
    } catch (err) {
        report = null;
        root.innerHTML = renderErrorBanner(`could not load ${patientId}: ${String(err)}`);
        return;
    }
    store.apply(() => initialState(patientId));
    requestActiveAnswer();
}

store.subscribe(() => redraw());

// One listener for every pane; actions are looked up from data-action.
root.addEventListener('click', (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>('[data-action]');
    if (target === null) return;
    const step = clickStep(target);
    if (step === null) return;
    store.apply(step);
    requestActiveAnswer();
});

function clickStep(target: HTMLElement): ((s: PaneState) => PaneState) | null {
    switch (target.dataset['action']) {
        case 'click-patient':
            return clickPatientDetails;
        case 'click-risk':
            return clickRiskPane;
        case 'select-month':
            return (s) => selectMonth(s, target.dataset['month'] ?? null);
        case 'select-grouping':
            return (s) => selectGrouping(s, target.dataset['grouping'] || null);
        case 'click-feature':
            return (s) => clickFeature(s, target.dataset['code'] || null);
        case 'click-grouping':
            return (s) => clickGrouping(s, target.dataset['grouping'] ?? '');
        case 'clear-brush':
            return clearBrush;
        case 'retry-answer':
            return (s) => s; // state unchanged; requestActiveAnswer refetches
        default:
            return null;
    }
}

root.addEventListener('change', (event) => {
    const target = event.target as HTMLSelectElement;
    if (target.dataset['action'] === 'choose-question') {
        store.apply((s) => chooseQuestion(s, target.value));
        requestActiveAnswer();
    } else if (target.dataset['action'] === 'set-strategy') {
        store.apply((s) => setStrategy(s, target.value));
        requestActiveAnswer();
    }
});

async function start(): Promise<void> {
    let roster;
    try {
        roster = await client.patients();
    } catch (err) {
        root.innerHTML = renderErrorBanner(`service not reachable at ${BASE_URL}: ${String(err)}`);
        return;
    }
    const first = roster[0];
    if (first === undefined) {
        root.innerHTML = renderErrorBanner('no patients on the service');
        return;
    }
    await showPatient(first.id);
}

void start();
