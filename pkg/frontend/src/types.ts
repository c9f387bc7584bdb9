/* Wire types for the cpgqa service. Field names follow the JSON payloads
 * exactly (snake_case), so responses parse straight into these shapes.
 */

export interface PatientListing {
    id: string;
    age_group: string;
    sex: string;
    risk_score: number | null;
}

export interface TimelineMonth {
    month: string;
    visits: number;
    codes: string[];
}

export interface RiskSummary {
    condition: string;
    score: number;
    band: string;
}

export interface FeatureImportance {
    name: string;
    code: string | null;
    weight: number;
    kind: string;
    /** Higher-level disease grouping; null for demographic features. */
    grouping: string | null;
}

export interface Question {
    id: string;
    patient_id: string;
    qtype: number;
    entity: string;
    text: string;
    slots: Record<string, string>;
    operator: string | null;
}

export interface PatientReport {
    patient: { id: string; age_group: string; sex: string };
    timeline: TimelineMonth[];
    risk: RiskSummary | null;
    features: FeatureImportance[];
    questions: Question[];
    warnings: string[];
}

export interface Answer {
    text: string;
    confidence: number | null;
    source: string;
    strategy: string | null;
    sentence_id: string | null;
    grade: string | null;
    in_range: boolean | null;
}

export interface AnswerResponse {
    question_id: string;
    answers: Answer[];
    reason: string | null;
}

export interface CorpusStats {
    chapter_count: number;
    sentence_count: number;
    token_count: number;
    avg_tokens_per_sentence: number;
    distinct_semantic_types: number | null;
}

/** Strategy labels the answer endpoint accepts. */
export const STRATEGIES = [
    'base',
    'overlap:confidence-first',
    'overlap:overlap-first',
    'semantic',
    'hops:3',
    'hops:5',
    'ontosort:hops-first',
    'ontosort:ancestors-first',
    'ontosort:confidence-first',
] as const;
