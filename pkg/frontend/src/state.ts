/* Pane state and the brushing interactions that link the panes.
 *
 * Every interaction below funnels into `questionFilter`, which the
 * questions-in-context pane applies to the report's question list:
 *
 *   1. clicking the patient details pane   -> diabetes-state questions (type 1)
 *   2. choosing a month on the timeline    -> lab (A1C) questions
 *   3. clicking the risk prediction pane   -> predicted-risk questions (type 2)
 *   4. selecting a disease grouping filter -> that grouping's feature questions,
 *      and the feature bars narrow to the grouping
 *   5. clicking a feature bar              -> that feature's questions
 *   6. clicking a grouping label           -> that grouping's feature questions
 *
 * All of them are reversible: re-triggering the same brush toggles it off,
 * and clearBrush always restores the full question list. Filters only ever
 * subset the list, never reorder it.
 */

import type { PatientReport, Question } from './types.js';

export type QuestionFilter =
    | { kind: 'all' }
    | { kind: 'qtype'; qtype: number }
    | { kind: 'lab' }
    | { kind: 'grouping'; grouping: string }
    | { kind: 'feature'; code: string };

export interface PaneState {
    patientId: string | null;
    selectedMonth: string | null;
    /** Feature code highlighted in the importance chart. */
    selectedFeature: string | null;
    /** Grouping chosen in the feature pane's filter-by column. */
    selectedGrouping: string | null;
    questionFilter: QuestionFilter;
    /** Question whose answer card is open. */
    activeQuestion: string | null;
    strategy: string;
    scorer: string;
}

export function initialState(patientId: string | null = null): PaneState {
    return {
        patientId,
        selectedMonth: null,
        selectedFeature: null,
        selectedGrouping: null,
        questionFilter: { kind: 'all' },
        activeQuestion: null,
        strategy: 'base',
        scorer: 'lexical',
    };
}

function sameFilter(a: QuestionFilter, b: QuestionFilter): boolean {
    if (a.kind !== b.kind) return false;
    if (a.kind === 'qtype' && b.kind === 'qtype') return a.qtype === b.qtype;
    if (a.kind === 'grouping' && b.kind === 'grouping') return a.grouping === b.grouping;
    if (a.kind === 'feature' && b.kind === 'feature') return a.code === b.code;
    return true;
}

/* Re-applying the active brush deselects it instead. */
function toggled(state: PaneState, filter: QuestionFilter): QuestionFilter {
    return sameFilter(state.questionFilter, filter) ? { kind: 'all' } : filter;
}

export function clickPatientDetails(state: PaneState): PaneState {
    return { ...state, questionFilter: toggled(state, { kind: 'qtype', qtype: 1 }) };
}

export function selectMonth(state: PaneState, month: string | null): PaneState {
    const next = state.selectedMonth === month ? null : month;
    return {
        ...state,
        selectedMonth: next,
        questionFilter: next === null ? { kind: 'all' } : { kind: 'lab' },
    };
}

export function clickRiskPane(state: PaneState): PaneState {
    return { ...state, questionFilter: toggled(state, { kind: 'qtype', qtype: 2 }) };
}

export function selectGrouping(state: PaneState, grouping: string | null): PaneState {
    const next = state.selectedGrouping === grouping ? null : grouping;
    return {
        ...state,
        selectedGrouping: next,
        questionFilter: next === null ? { kind: 'all' } : { kind: 'grouping', grouping: next },
    };
}

export function clickFeature(state: PaneState, code: string | null): PaneState {
    const next = state.selectedFeature === code ? null : code;
    return {
        ...state,
        selectedFeature: next,
        questionFilter: next === null ? { kind: 'all' } : { kind: 'feature', code: next },
    };
}

export function clickGrouping(state: PaneState, grouping: string): PaneState {
    // Chart-label click; unlike selectGrouping it leaves the bar filter alone.
    return { ...state, questionFilter: toggled(state, { kind: 'grouping', grouping }) };
}

export function clearBrush(state: PaneState): PaneState {
    return {
        ...state,
        selectedMonth: null,
        selectedFeature: null,
        selectedGrouping: null,
        questionFilter: { kind: 'all' },
    };
}

export function chooseQuestion(state: PaneState, questionId: string | null): PaneState {
    return { ...state, activeQuestion: questionId };
}

export function setStrategy(state: PaneState, strategy: string): PaneState {
    return { ...state, strategy };
}

// --- selectors -------------------------------------------------------------

function groupingOf(report: PatientReport, code: string | undefined): string | null {
    if (!code) return null;
    const feature = report.features.find((f) => f.code === code);
    return feature ? feature.grouping : null;
}

export function visibleFeatures(report: PatientReport, state: PaneState) {
    if (state.selectedGrouping === null) return report.features;
    return report.features.filter((f) => f.grouping === state.selectedGrouping);
}

export function filteredQuestions(report: PatientReport, state: PaneState): Question[] {
    const filter = state.questionFilter;
    switch (filter.kind) {
        case 'all':
            return report.questions;
        case 'qtype':
            return report.questions.filter((q) => q.qtype === filter.qtype);
        case 'lab':
            return report.questions.filter((q) => 'lab' in q.slots);
        case 'feature':
            return report.questions.filter(
                (q) => q.qtype === 3 && q.slots['code'] === filter.code,
            );
        case 'grouping':
            return report.questions.filter(
                (q) => q.qtype === 3 && groupingOf(report, q.slots['code']) === filter.grouping,
            );
    }
}

/** The question whose card shows; falls back to the first visible question. */
export function activeQuestion(report: PatientReport, state: PaneState): Question | null {
    const visible = filteredQuestions(report, state);
    const chosen = visible.find((q) => q.id === state.activeQuestion);
    return chosen ?? visible[0] ?? null;
}

/** Distinct groupings present in the report, for the filter-by column. */
export function groupingsOf(report: PatientReport): string[] {
    const seen = new Set<string>();
    for (const f of report.features) {
        if (f.grouping !== null) seen.add(f.grouping);
    }
    return [...seen].sort();
}

// --- store -----------------------------------------------------------------

export class Store {
    private listeners: Array<(s: PaneState) => void> = [];

    constructor(private state: PaneState) {}

    get(): PaneState {
        return this.state;
    }

    apply(step: (s: PaneState) => PaneState): void {
        this.state = step(this.state);
        for (const fn of this.listeners) fn(this.state);
    }

    subscribe(fn: (s: PaneState) => void): () => void {
        this.listeners.push(fn);
        return () => {
            this.listeners = this.listeners.filter((f) => f !== fn);
        };
    }
}
