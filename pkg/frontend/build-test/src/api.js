/** Typed client for the curation service HTTP API. */
export class ApiError extends Error {
    status;
    constructor(message, status = null) {
        super(message);
        this.status = status;
        this.name = "ApiError";
    }
}
export class ApiClient {
    baseUrl;
    fetchImpl;
    constructor(baseUrl = "", fetchImpl = (input, init) => fetch(input, init)) {
        this.baseUrl = baseUrl;
        this.fetchImpl = fetchImpl;
    }
    async request(path, init) {
        let resp;
        try {
            resp = await this.fetchImpl(this.baseUrl + path, init);
        }
        catch (err) {
            throw new ApiError(`service unreachable: ${String(err)}`, null);
        }
        if (!resp.ok) {
            let detail = `HTTP ${resp.status}`;
            try {
                const body = (await resp.json());
                if (body.detail)
                    detail = `${detail}: ${body.detail}`;
            }
            catch {
                // non-JSON error body; keep the bare status line
            }
            throw new ApiError(detail, resp.status);
        }
        return (await resp.json());
    }
    getGroups() {
        return this.request("/api/groups");
    }
    getCandidates(opts = {}) {
        const params = new URLSearchParams();
        if (opts.group)
            params.set("group", opts.group);
        params.set("page", String(opts.page ?? 0));
        params.set("page_size", String(opts.pageSize ?? 12));
        return this.request(`/api/candidates?${params.toString()}`);
    }
    getStats() {
        return this.request("/api/stats");
    }
    submitVerdict(body) {
        return this.request("/api/verdict", {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
    }
    /** Absolute URL for an image endpoint path returned by the service. */
    resolve(path) {
        return this.baseUrl + path;
    }
}
