/* Answer-card lifecycle. Cards are fetched on demand per question;
 * concurrent requests for the same card are resolved last-write-wins,
 * so a slow earlier response can never clobber a newer one.
 */

import { ServiceError } from './api.js';
import type { AnswerResponse } from './types.js';

/** The one client capability cards need; ServiceClient satisfies it. */
export interface AnswerFetcher {
    answer(
        patientId: string,
        questionId: string,
        strategy: string,
        scorer: string,
    ): Promise<AnswerResponse>;
}

export type CardPhase =
    | { status: 'idle' }
    | { status: 'loading' }
    | { status: 'answered'; response: AnswerResponse }
    | { status: 'failed'; httpStatus: number | null; reason: string; retryable: boolean };

const IDLE: CardPhase = { status: 'idle' };

export class AnswerCardController {
    private phases = new Map<string, CardPhase>();
    private sequence = new Map<string, number>();

    constructor(
        private readonly client: AnswerFetcher,
        private readonly onChange: (questionId: string) => void = () => {},
    ) {}

    phase(questionId: string): CardPhase {
        return this.phases.get(questionId) ?? IDLE;
    }

    async request(
        patientId: string,
        questionId: string,
        strategy: string,
        scorer: string,
    ): Promise<void> {
        const token = (this.sequence.get(questionId) ?? 0) + 1;
        this.sequence.set(questionId, token);
        this.set(questionId, { status: 'loading' });
        let phase: CardPhase;
        try {
            const response = await this.client.answer(patientId, questionId, strategy, scorer);
            phase = { status: 'answered', response };
        } catch (err) {
            if (err instanceof ServiceError) {
                // 502 means the remote scorer hiccuped; worth a retry button.
                // Client-side errors (4xx) will not heal by retrying.
                const retryable = err.status === null || err.status >= 500;
                phase = {
                    status: 'failed',
                    httpStatus: err.status,
                    reason: err.reason,
                    retryable,
                };
            } else {
                throw err;
            }
        }
        if (this.sequence.get(questionId) !== token) return; // superseded
        this.set(questionId, phase);
    }

    private set(questionId: string, phase: CardPhase): void {
        this.phases.set(questionId, phase);
        this.onChange(questionId);
    }
}
