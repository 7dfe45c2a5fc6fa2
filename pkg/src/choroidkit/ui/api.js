/**
 * Typed client for the annotation service HTTP API.
 *
 * Every call returns the parsed payload together with the raw response
 * text. The text is what gets hashed, exported, and compared across
 * re-runs, so no displayed value ever passes through a client-side
 * re-serialization. Failures keep the exact error body for verbatim
 * display.
 */
/** Non-2xx response; keeps the exact body text so the UI can show it verbatim. */
export class ApiFailure extends Error {
    status;
    bodyText;
    constructor(status, bodyText) {
        super(`HTTP ${status}: ${bodyText}`);
        this.status = status;
        this.bodyText = bodyText;
        this.name = "ApiFailure";
    }
    /** Parsed body when the server sent JSON, null otherwise. */
    get body() {
        try {
            return JSON.parse(this.bodyText);
        }
        catch {
            return null;
        }
    }
}
export class ApiClient {
    baseUrl;
    fetchFn;
    constructor(baseUrl = "", fetchFn = (...args) => fetch(...args)) {
        this.baseUrl = baseUrl;
        this.fetchFn = fetchFn;
    }
    sessionUrl(id) {
        return `${this.baseUrl}/api/session/${id}`;
    }
    imageUrl(id) {
        return `${this.sessionUrl(id)}/image`;
    }
    edgemapUrl(id, target) {
        return `${this.sessionUrl(id)}/edgemap?target=${target}`;
    }
    maskUrl(id) {
        return `${this.sessionUrl(id)}/vessels/mask`;
    }
    async request(url, init) {
        const response = await this.fetchFn(url, init);
        if (!response.ok) {
            throw new ApiFailure(response.status, await response.text());
        }
        return response;
    }
    async json(url, init) {
        const response = await this.request(url, init);
        const text = await response.text();
        return { payload: JSON.parse(text), text };
    }
    post(url, body) {
        return this.json(url, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
    }
    async createSession(image, axialScale, lateralScale, eye = "unknown") {
        const form = new FormData();
        form.append("image", image, "scan.png");
        form.append("axial_scale", String(axialScale));
        form.append("lateral_scale", String(lateralScale));
        form.append("eye", eye);
        const { payload } = await this.json(`${this.baseUrl}/api/session`, {
            method: "POST",
            body: form,
        });
        return payload;
    }
    trace(id, req) {
        return this.post(`${this.sessionUrl(id)}/trace`, req);
    }
    vessels(id, req = {}) {
        return this.post(`${this.sessionUrl(id)}/vessels`, req);
    }
    measure(id, req) {
        return this.post(`${this.sessionUrl(id)}/measure`, req);
    }
    async maskBytes(id) {
        const response = await this.request(this.maskUrl(id));
        return response.arrayBuffer();
    }
    async deleteSession(id) {
        await this.request(this.sessionUrl(id), { method: "DELETE" });
    }
}
