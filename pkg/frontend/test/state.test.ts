/* The six brushing interactions, their reversibility, and the question
 * filter they all feed. The report under test is fetched through the
 * client from the mocked service, same as the browser path.
 */

import { beforeAll, describe, expect, it } from 'vitest';

import { ServiceClient } from '../src/api.js';
import {
    activeQuestion,
    chooseQuestion,
    clearBrush,
    clickFeature,
    clickGrouping,
    clickPatientDetails,
    clickRiskPane,
    filteredQuestions,
    groupingsOf,
    initialState,
    selectGrouping,
    selectMonth,
    Store,
    visibleFeatures,
    type PaneState,
} from '../src/state.js';
import type { PatientReport } from '../src/types.js';
import { CIRCULATORY, ENDOCRINE, mockService } from './mock.js';

let report: PatientReport;

beforeAll(async () => {
    const service = mockService();
    const client = new ServiceClient('http://service.test', service.fetch);
    report = await client.report('p001');
});

const ids = (state: PaneState) => filteredQuestions(report, state).map((q) => q.id);
const allIds = () => report.questions.map((q) => q.id);

describe('patient details brush', () => {
    it('brings up the diabetes-state question', () => {
        const state = clickPatientDetails(initialState('p001'));
        expect(ids(state)).toEqual(['p001:t1']);
    });

    it('toggles off on a second click', () => {
        const state = clickPatientDetails(clickPatientDetails(initialState('p001')));
        expect(ids(state)).toEqual(allIds());
    });
});

describe('timeline month brush', () => {
    it('filters to the lab questions', () => {
        const state = selectMonth(initialState('p001'), '2019-04');
        expect(state.selectedMonth).toBe('2019-04');
        expect(ids(state)).toEqual(['p001:t5:a1c:lt', 'p001:t5:a1c:gt']);
        for (const q of filteredQuestions(report, state)) {
            expect(q.slots['lab']).toBe('A1C');
        }
    });

    it('switching months keeps the lab filter', () => {
        const state = selectMonth(selectMonth(initialState('p001'), '2019-04'), '2020-02');
        expect(state.selectedMonth).toBe('2020-02');
        expect(ids(state)).toEqual(['p001:t5:a1c:lt', 'p001:t5:a1c:gt']);
    });

    it('re-choosing the same month deselects it', () => {
        const state = selectMonth(selectMonth(initialState('p001'), '2019-04'), '2019-04');
        expect(state.selectedMonth).toBeNull();
        expect(ids(state)).toEqual(allIds());
    });
});

describe('risk pane brush', () => {
    it('brings up the predicted-risk question', () => {
        const state = clickRiskPane(initialState('p001'));
        expect(ids(state)).toEqual(['p001:t2']);
    });

    it('toggles off', () => {
        const state = clickRiskPane(clickRiskPane(initialState('p001')));
        expect(ids(state)).toEqual(allIds());
    });
});

describe('grouping filter selection', () => {
    it('narrows the feature bars and the questions together', () => {
        const state = selectGrouping(initialState('p001'), CIRCULATORY);
        expect(visibleFeatures(report, state).map((f) => f.code)).toEqual(['I10', 'I50.9']);
        expect(ids(state)).toEqual(['p001:t3:i10', 'p001:t3:i50-9']);
    });

    it('clearing the selection restores both', () => {
        const state = selectGrouping(selectGrouping(initialState('p001'), CIRCULATORY), null);
        expect(visibleFeatures(report, state)).toEqual(report.features);
        expect(ids(state)).toEqual(allIds());
    });

    it('excludes demographic features, which have no grouping', () => {
        const state = selectGrouping(initialState('p001'), CIRCULATORY);
        expect(visibleFeatures(report, state).every((f) => f.grouping === CIRCULATORY)).toBe(true);
    });
});

describe('feature bar brush', () => {
    it("brings up that feature's question only", () => {
        const state = clickFeature(initialState('p001'), 'I10');
        expect(ids(state)).toEqual(['p001:t3:i10']);
    });

    it('clicking the selected bar again deselects', () => {
        const state = clickFeature(clickFeature(initialState('p001'), 'I10'), 'I10');
        expect(state.selectedFeature).toBeNull();
        expect(ids(state)).toEqual(allIds());
    });

    it('a null code (demographic bar) clears instead of filtering', () => {
        const state = clickFeature(initialState('p001'), null);
        expect(ids(state)).toEqual(allIds());
    });
});

describe('grouping label brush', () => {
    it("brings up the grouping's questions without touching the bars", () => {
        const state = clickGrouping(initialState('p001'), ENDOCRINE);
        expect(ids(state)).toEqual(['p001:t3:e11-9']);
        expect(visibleFeatures(report, state)).toEqual(report.features);
    });

    it('toggles off', () => {
        const state = clickGrouping(clickGrouping(initialState('p001'), ENDOCRINE), ENDOCRINE);
        expect(ids(state)).toEqual(allIds());
    });
});

describe('reversibility', () => {
    const brushes: Array<[string, (s: PaneState) => PaneState]> = [
        ['patient details', clickPatientDetails],
        ['month', (s) => selectMonth(s, '2019-01')],
        ['risk pane', clickRiskPane],
        ['grouping selection', (s) => selectGrouping(s, ENDOCRINE)],
        ['feature', (s) => clickFeature(s, 'E11.9')],
        ['grouping label', (s) => clickGrouping(s, CIRCULATORY)],
    ];

    it.each(brushes)('clearBrush after %s restores the full list', (_name, brush) => {
        const state = clearBrush(brush(initialState('p001')));
        expect(ids(state)).toEqual(allIds());
        expect(state.selectedMonth).toBeNull();
        expect(state.selectedFeature).toBeNull();
        expect(state.selectedGrouping).toBeNull();
    });

    it.each(brushes)('%s only subsets, never reorders', (_name, brush) => {
        const filtered = ids(brush(initialState('p001')));
        const all = allIds();
        const positions = filtered.map((id) => all.indexOf(id));
        expect(positions).not.toContain(-1);
        expect([...positions].sort((a, b) => a - b)).toEqual(positions);
    });
});

describe('active question', () => {
    it('defaults to the first visible question', () => {
        expect(activeQuestion(report, initialState('p001'))?.id).toBe('p001:t1');
    });

    it('keeps an explicit choice while it stays visible', () => {
        const state = chooseQuestion(initialState('p001'), 'p001:t3:e11-9');
        expect(activeQuestion(report, state)?.id).toBe('p001:t3:e11-9');
    });

    it('falls back when a brush hides the chosen question', () => {
        let state = chooseQuestion(initialState('p001'), 'p001:t3:e11-9');
        state = clickFeature(state, 'I10');
        expect(activeQuestion(report, state)?.id).toBe('p001:t3:i10');
    });
});

describe('groupings', () => {
    it('lists distinct groupings sorted, dropping demographics', () => {
        expect(groupingsOf(report)).toEqual([CIRCULATORY, ENDOCRINE]);
    });
});

describe('store', () => {
    it('notifies subscribers and supports unsubscribe', () => {
        const store = new Store(initialState('p001'));
        const seen: string[] = [];
        const off = store.subscribe((s) => seen.push(s.questionFilter.kind));
        store.apply(clickRiskPane);
        off();
        store.apply(clearBrush);
        expect(seen).toEqual(['qtype']);
        expect(store.get().questionFilter.kind).toBe('all');
    });
});
