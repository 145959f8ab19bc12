// Span highlighting from the parsed span JSON the service provides.
// The UI never re-parses inline tags itself.

import { SpanDocJson } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function renderHighlights(doc: SpanDocJson): string {
  const chars = Array.from(doc.plain_text);
  const parts: string[] = [];
  let cursor = 0;
  for (const span of doc.spans) {
    parts.push(escapeHtml(chars.slice(cursor, span.start_char).join('')));
    const body = escapeHtml(chars.slice(span.start_char, span.end_char).join(''));
    parts.push(`<mark class="span" title="${escapeHtml(span.label)}">${body}</mark>`);
    cursor = span.end_char;
  }
  parts.push(escapeHtml(chars.slice(cursor).join('')));
  return parts.join('');
}
