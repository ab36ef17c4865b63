/** Wire types for the /v1 JSON contract. Field names match the API verbatim. */

export interface DecodingDefaults {
  beam_size: number;
  top_p: number;
  max_output_length: number;
}

export interface ModelInfo {
  id: string;
  language: string;
  ae_endpoint: string;
  qg_endpoint: string;
  defaults: DecodingDefaults;
}

export interface QaPair {
  question: string;
  answer: string;
  overlap: number;
  perplexity: number | null;
}

export interface GenerateQaRequest {
  model_id: string;
  paragraph: string;
  beam_size: number;
  top_p: number;
}

export interface GenerateQuestionRequest extends GenerateQaRequest {
  answer: string;
}

export interface GenerateQaResponse {
  pairs: QaPair[];
  diagnostics: {
    dropped: Record<string, number>;
    source_sentence_indices: number[];
  };
}

export interface GenerateQuestionResponse {
  question: string;
  overlap: number;
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}
