import { describe, expect, it } from 'vitest';

import { escapeHtml, renderHighlights } from '../src/highlight.js';

describe('span highlighting', () => {
  it('wraps spans in marks using the offsets provided by the service', () => {
    const html = renderHighlights({
      plain_text: 'He devoured the book',
      spans: [{ label: 'Metaphor', start_char: 3, end_char: 11 }],
    });
    expect(html).toBe('He <mark class="span" title="Metaphor">devoured</mark> the book');
  });

  it('escapes markup in the text and keeps offsets in code points', () => {
    const html = renderHighlights({
      plain_text: '\u{1f600} a <b> c',
      spans: [{ label: 'Metaphor', start_char: 2, end_char: 3 }],
    });
    expect(html).toBe('\u{1f600} <mark class="span" title="Metaphor">a</mark> &lt;b&gt; c');
  });

  it('renders multiple disjoint spans in order', () => {
    const html = renderHighlights({
      plain_text: 'a b c d',
      spans: [
        { label: 'M', start_char: 0, end_char: 1 },
        { label: 'M', start_char: 4, end_char: 5 },
      ],
    });
    expect(html.match(/<mark/g)).toHaveLength(2);
  });

  it('escapes html metacharacters', () => {
    expect(escapeHtml('<a href="x">&</a>')).toBe(
      '&lt;a href=&quot;x&quot;&gt;&amp;&lt;/a&gt;',
    );
  });
});
