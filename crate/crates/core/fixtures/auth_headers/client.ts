import crypto from "crypto";

export class PanelClient {
  private apiKey: string;
  private languageCode: string;

  constructor(apiKey: string, languageCode = "en") {
    this.apiKey = apiKey;
    this.languageCode = languageCode;
  }

  getAuthHeaders() {
    const timestamp = Math.floor(Date.now() / 1000).toString();
    const content = `1panel${this.apiKey}${timestamp}`;
    const token = crypto.createHash("md5").update(content).digest("hex");
    return {
      "1Panel-Token": token,
      "1Panel-Timestamp": timestamp,
      "Accept-Language": this.languageCode,
    };
  }
}
