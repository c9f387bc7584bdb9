/* HTML renderers for the five panes. Pure string -> string functions:
 * rendering the same report and state twice yields identical markup,
 * which keeps the panes testable without a browser.
 */

import type { CardPhase } from './cards.js';
import {
    activeQuestion,
    filteredQuestions,
    groupingsOf,
    visibleFeatures,
    type PaneState,
} from './state.js';
import { STRATEGIES, type Answer, type PatientReport, type Question } from './types.js';

export function escapeHtml(text: string): string {
    return text
        .replace(/&/g, '&amp;')
        .replace(/</g, '&lt;')
        .replace(/>/g, '&gt;')
        .replace(/"/g, '&quot;');
}

const esc = escapeHtml;

export function renderPatientPane(report: PatientReport): string {
    const p = report.patient;
    return `<section class="pane pane-patient" data-action="click-patient">
  <h2>Patient details</h2>
  <dl>
    <dt>Id</dt><dd>${esc(p.id)}</dd>
    <dt>Age group</dt><dd>${esc(p.age_group)}</dd>
    <dt>Sex</dt><dd>${esc(p.sex)}</dd>
  </dl>
</section>`;
}

export function renderTimelinePane(report: PatientReport, state: PaneState): string {
    const rows = report.timeline
        .map((m) => {
            const selected = m.month === state.selectedMonth ? ' selected' : '';
            return `    <li class="month${selected}" data-action="select-month" data-month="${esc(m.month)}">
      <span class="label">${esc(m.month)}</span>
      <span class="visits">${m.visits} visit${m.visits === 1 ? '' : 's'}</span>
      <span class="codes">${esc(m.codes.join(', '))}</span>
    </li>`;
        })
        .join('\n');
    return `<section class="pane pane-timeline">
  <h2>History timeline</h2>
  <ul>
${rows}
  </ul>
</section>`;
}

const BANDS = ['low', 'elevated', 'high'] as const;

export function renderRiskPane(report: PatientReport): string {
    if (report.risk === null) {
        return `<section class="pane pane-risk" data-action="click-risk">
  <h2>Risk prediction</h2>
  <p class="empty">no prediction</p>
</section>`;
    }
    const risk = report.risk;
    const percent = (risk.score * 100).toFixed(1);
    // Monotone threshold scale: three labeled bands, marker at the score.
    const segments = BANDS.map((band) => {
        const active = band === risk.band ? ' active' : '';
        return `      <span class="band band-${band}${active}">${band}</span>`;
    }).join('\n');
    return `<section class="pane pane-risk" data-action="click-risk">
  <h2>Risk prediction</h2>
  <p class="score">${esc(risk.condition)}: ${percent} % (${esc(risk.band)})</p>
  <div class="scale">
${segments}
    <span class="marker" style="left: ${percent}%"></span>
  </div>
</section>`;
}

export function renderFeaturesPane(report: PatientReport, state: PaneState): string {
    const groupings = groupingsOf(report);
    const filterRows = ['', ...groupings]
        .map((g) => {
            const label = g === '' ? 'All groupings' : g;
            const selected = (g === '' ? null : g) === state.selectedGrouping ? ' selected' : '';
            return `      <li class="grouping${selected}" data-action="select-grouping" data-grouping="${esc(g)}">${esc(label)}</li>`;
        })
        .join('\n');
    const features = visibleFeatures(report, state);
    const maxWeight = Math.max(...report.features.map((f) => Math.abs(f.weight)), 1e-9);
    const bars = features
        .map((f) => {
            const width = ((Math.abs(f.weight) / maxWeight) * 100).toFixed(0);
            const sign = f.weight < 0 ? ' negative' : '';
            const selected = f.code !== null && f.code === state.selectedFeature ? ' selected' : '';
            const grouping =
                f.grouping === null
                    ? ''
                    : `        <span class="grouping-label" data-action="click-grouping" data-grouping="${esc(f.grouping)}">${esc(f.grouping)}</span>\n`;
            return `    <li class="feature${selected}" data-action="click-feature" data-code="${esc(f.code ?? '')}">
      <span class="name">${esc(f.name)}</span>
      <span class="bar${sign}" style="width: ${width}%"></span>
      <span class="weight">${f.weight.toFixed(2)}</span>
${grouping}    </li>`;
        })
        .join('\n');
    return `<section class="pane pane-features">
  <h2>Feature importances</h2>
  <div class="filter-by">
    <h3>Filter by</h3>
    <ul>
${filterRows}
    </ul>
  </div>
  <ul class="bars">
${bars}
  </ul>
</section>`;
}

function renderAnswer(answer: Answer): string {
    const confidence =
        answer.confidence === null
            ? ''
            : `    <span class="confidence">confidence ${answer.confidence.toFixed(3)}</span>\n`;
    const grade =
        answer.grade === null ? '' : `    <span class="grade">Grade ${esc(answer.grade)}</span>\n`;
    const range =
        answer.in_range === null
            ? ''
            : `    <span class="range ${answer.in_range ? 'in' : 'out'}">${answer.in_range ? 'in range' : 'out of range'}</span>\n`;
    const strategy =
        answer.strategy === null
            ? ''
            : `    <span class="strategy">${esc(answer.strategy)}</span>\n`;
    return `  <article class="answer">
    <p class="text">${esc(answer.text)}</p>
    <span class="source source-${esc(answer.source)}">${esc(answer.source)}</span>
${confidence}${grade}${range}${strategy}  </article>`;
}

export function renderCard(question: Question, phase: CardPhase): string {
    let body: string;
    switch (phase.status) {
        case 'idle':
        case 'loading':
            body = `  <p class="loading">loading&hellip;</p>`;
            break;
        case 'failed': {
            const retry = phase.retryable
                ? `\n  <button data-action="retry-answer" data-question="${esc(question.id)}">retry</button>`
                : '';
            body = `  <p class="error">answer failed: ${esc(phase.reason)}</p>${retry}`;
            break;
        }
        case 'answered':
            body = phase.response.answers.map(renderAnswer).join('\n');
            break;
    }
    return `<div class="card" data-question="${esc(question.id)}">
  <p class="question">${esc(question.text)}</p>
${body}
</div>`;
}

export function renderQuestionsPane(
    report: PatientReport,
    state: PaneState,
    cardPhase: (questionId: string) => CardPhase,
): string {
    const visible = filteredQuestions(report, state);
    const active = activeQuestion(report, state);
    const options = visible
        .map((q) => {
            const selected = active !== null && q.id === active.id ? ' selected' : '';
            return `      <option value="${esc(q.id)}"${selected}>${esc(q.text)}</option>`;
        })
        .join('\n');
    const strategies = STRATEGIES.map((s) => {
        const selected = s === state.strategy ? ' selected' : '';
        return `      <option value="${s}"${selected}>${s}</option>`;
    }).join('\n');
    const filterNote =
        state.questionFilter.kind === 'all'
            ? ''
            : `\n  <button class="clear" data-action="clear-brush">show all ${report.questions.length} questions</button>`;
    const card = active === null ? '' : '\n' + renderCard(active, cardPhase(active.id));
    return `<section class="pane pane-questions">
  <h2>Questions in context</h2>
  <label>Question
    <select data-action="choose-question">
${options}
    </select>
  </label>
  <label>Strategy
    <select data-action="set-strategy">
${strategies}
    </select>
  </label>${filterNote}${card}
</section>`;
}

export function renderErrorBanner(message: string): string {
    return `<div class="banner error">${esc(message)}</div>`;
}

/** The whole dashboard; panes disabled behind a banner when loading failed. */
export function renderDashboard(
    report: PatientReport,
    state: PaneState,
    cardPhase: (questionId: string) => CardPhase,
): string {
    return [
        renderPatientPane(report),
        renderTimelinePane(report, state),
        renderRiskPane(report),
        renderFeaturesPane(report, state),
        renderQuestionsPane(report, state, cardPhase),
    ].join('\n');
}
