/* Thin typed client over the service's JSON API. The fetch function is
 * injectable so tests can run against a mocked service.
 */

import type { AnswerResponse, CorpusStats, PatientListing, PatientReport } from './types.js';

export class ServiceError extends Error {
    constructor(
        /** HTTP status, or null when the request never reached the service. */
        readonly status: number | null,
        readonly reason: string,
    ) {
        super(status === null ? reason : `${status}: ${reason}`);
        this.name = 'ServiceError';
    }
}

async function asServiceError(res: Response): Promise<ServiceError> {
    let reason = res.statusText || `request failed (${res.status})`;
    try {
        const body = await res.json();
        if (body && typeof body.reason === 'string') reason = body.reason;
    } catch {
        // non-JSON error body; keep the status text
    }
    return new ServiceError(res.status, reason);
}

export class ServiceClient {
    constructor(
        private readonly baseUrl: string,
        private readonly fetchFn: typeof fetch = fetch,
    ) {
        this.baseUrl = baseUrl.replace(/\/+$/, '');
    }

    private async get<T>(path: string): Promise<T> {
        let res: Response;
        try {
            res = await this.fetchFn(this.baseUrl + path);
        } catch (err) {
            throw new ServiceError(null, `service unreachable: ${String(err)}`);
        }
        if (!res.ok) throw await asServiceError(res);
        return (await res.json()) as T;
    }

    patients(): Promise<PatientListing[]> {
        return this.get('/patients');
    }

    report(patientId: string): Promise<PatientReport> {
        return this.get(`/patients/${encodeURIComponent(patientId)}/report`);
    }

    stats(): Promise<CorpusStats> {
        return this.get('/corpus/stats');
    }

    async answer(
        patientId: string,
        questionId: string,
        strategy: string,
        scorer: string,
    ): Promise<AnswerResponse> {
        const url =
            `${this.baseUrl}/patients/${encodeURIComponent(patientId)}` +
            `/questions/${encodeURIComponent(questionId)}/answer`;
        let res: Response;
        try {
            res = await this.fetchFn(url, {
                method: 'POST',
                headers: { 'content-type': 'application/json' },
                body: JSON.stringify({ strategy, scorer }),
            });
        } catch (err) {
            throw new ServiceError(null, `service unreachable: ${String(err)}`);
        }
        if (!res.ok) throw await asServiceError(res);
        return (await res.json()) as AnswerResponse;
    }
}
